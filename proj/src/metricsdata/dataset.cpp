#include "tot/metricsdata/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "tot/errors.hpp"
#include "tot/numkit/tensor_io.hpp"

namespace tot::metricsdata {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::uint32_t checksum(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; samples are far below 4 GiB but chunk anyway.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = crc32(crc, bytes.data() + pos, n);
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

void check_shape(const Tensor& t, const numkit::Shape& want, const std::string& id, const char* what) {
  if (t.shape() != want) {
    throw LoadError("sample '" + id + "': " + what + " has shape " + numkit::to_string(t.shape()) + ", manifest says " +
                    numkit::to_string(want));
  }
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<std::string> default_class_names(std::size_t classes) {
  if (classes == 2) return {"harmless", "harmful"};
  if (classes == 3) return {"not harmful", "somewhat harmful", "very harmful"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < classes; ++i) out.push_back("level" + std::to_string(i));
  return out;
}

void validate_bundle(const FeatureBundle& b, const DatasetManifest& m) {
  check_shape(b.v_g, {m.d_h}, b.id, "v_g");
  check_shape(b.t_g, {m.d_h}, b.id, "t_g");
  check_shape(b.v, {m.n_p2, m.d_h}, b.id, "V");
  check_shape(b.t, {m.n_s, m.d_h}, b.id, "T");
  if (b.label >= m.classes.size()) {
    throw LoadError("sample '" + b.id + "': label " + std::to_string(b.label) + " but only " +
                    std::to_string(m.classes.size()) + " classes");
  }
  for (const Tensor* t : {&b.v_g, &b.t_g, &b.v, &b.t})
    if (!t->all_finite()) throw LoadError("sample '" + b.id + "': non-finite feature value");
}

fs::path write_dataset(const fs::path& dir, const DatasetManifest& shape, const std::vector<FeatureBundle>& samples) {
  if (shape.split.empty()) throw ConfigError("write_dataset: split name is empty");
  fs::create_directories(dir);
  DatasetManifest m = shape;
  m.tensors = m.split + ".bin";
  m.samples.clear();
  std::vector<std::uint8_t> blob;
  for (const auto& b : samples) {
    validate_bundle(b, m);
    const std::size_t start = blob.size();
    for (const Tensor* t : {&b.v_g, &b.t_g, &b.v, &b.t}) numkit::append_tensor(blob, *t);
    m.samples.push_back(
        {b.id, b.label, start, checksum(std::span<const std::uint8_t>(blob).subspan(start, blob.size() - start))});
  }
  {
    std::ofstream out(dir / m.tensors, std::ios::binary);
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw LoadError("failed writing " + (dir / m.tensors).string());
  }
  json j = {{"version", m.version}, {"d_h", m.d_h},         {"n_p2", m.n_p2},
            {"n_s", m.n_s},         {"classes", m.classes}, {"split", m.split},
            {"tensors", m.tensors}};
  json rows = json::array();
  for (const auto& s : m.samples)
    rows.push_back({{"id", s.id}, {"label", s.label}, {"offset", s.offset}, {"crc32", s.crc32}});
  j["samples"] = std::move(rows);
  const fs::path path = dir / (m.split + ".json");
  std::ofstream out(path);
  out << j.dump(1) << '\n';
  if (!out) throw LoadError("failed writing " + path.string());
  return path;
}

Dataset load_dataset(const fs::path& manifest_path) {
  const json j = read_json(manifest_path);
  Dataset ds;
  DatasetManifest& m = ds.manifest;
  try {
    m.version = j.at("version").get<int>();
    m.d_h = j.at("d_h").get<std::size_t>();
    m.n_p2 = j.at("n_p2").get<std::size_t>();
    m.n_s = j.at("n_s").get<std::size_t>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.split = j.value("split", std::string());
    m.tensors = j.at("tensors").get<std::string>();
    for (const auto& s : j.at("samples")) {
      m.samples.push_back({s.at("id").get<std::string>(), s.at("label").get<std::size_t>(),
                           s.at("offset").get<std::uint64_t>(), s.value("crc32", std::uint32_t{0})});
    }
  } catch (const json::exception& e) {
    throw LoadError(manifest_path.string() + ": malformed manifest: " + e.what());
  }
  if (m.version != 1) throw LoadError(manifest_path.string() + ": unsupported manifest version");
  if (m.classes.size() < 2) throw LoadError(manifest_path.string() + ": need at least 2 classes");
  if (m.samples.empty()) throw LoadError(manifest_path.string() + ": no samples");

  const auto blob = numkit::read_file_bytes(manifest_path.parent_path() / m.tensors);
  const std::span<const std::uint8_t> bytes(blob);
  for (const auto& rec : m.samples) {
    if (rec.offset > bytes.size()) throw LoadError("sample '" + rec.id + "': offset beyond the tensor blob");
    std::size_t pos = rec.offset;
    FeatureBundle b;
    b.id = rec.id;
    b.label = rec.label;
    try {
      b.v_g = numkit::decode_tensor(bytes, pos);
      b.t_g = numkit::decode_tensor(bytes, pos);
      b.v = numkit::decode_tensor(bytes, pos);
      b.t = numkit::decode_tensor(bytes, pos);
    } catch (const LoadError& e) {
      throw LoadError("sample '" + rec.id + "': " + e.what());
    }
    if (checksum(bytes.subspan(rec.offset, pos - rec.offset)) != rec.crc32) {
      throw LoadError("sample '" + rec.id + "': checksum mismatch");
    }
    validate_bundle(b, m);
    ds.samples.push_back(std::move(b));
  }
  return ds;
}

void write_index(const fs::path& path, const std::map<std::string, std::string>& splits) {
  json j = {{"version", 1}, {"splits", splits}};
  std::ofstream out(path);
  out << j.dump(1) << '\n';
  if (!out) throw LoadError("failed writing " + path.string());
}

fs::path resolve_split(const fs::path& path, const std::string& split) {
  const json j = read_json(path);
  if (j.contains("splits")) {
    const auto& s = j.at("splits");
    if (!s.contains(split)) throw InputError(path.string() + " has no '" + split + "' split");
    return path.parent_path() / s.at(split).get<std::string>();
  }
  const std::string tag = j.value("split", std::string());
  if (!split.empty() && !tag.empty() && tag != split) {
    throw InputError(path.string() + " is the '" + tag + "' split, not '" + split + "'");
  }
  return path;
}

}  // namespace tot::metricsdata
