#include <gtest/gtest.h>
#include <zlib.h>

#include <fstream>
#include <json.hpp>
#include <random>
#include <set>

#include "support/tempdir.hpp"
#include "support/tiny.hpp"
#include "tot/errors.hpp"
#include "tot/metricsdata/dataset.hpp"
#include "tot/metricsdata/synth.hpp"
#include "tot/numkit/tensor_io.hpp"

using namespace tot::metricsdata;
using tot::testing::TempDir;

namespace {

DatasetManifest shape_of(const tot::metricsdata::ModelConfig& c, const std::string& split) {
  DatasetManifest m;
  m.d_h = c.d_h;
  m.n_p2 = c.n_p2;
  m.n_s = c.n_s;
  m.classes = default_class_names(c.classes);
  m.split = split;
  return m;
}

std::vector<FeatureBundle> f32_bundles(std::size_t n, const tot::metricsdata::ModelConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<FeatureBundle> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto b = tot::testing::random_bundle(rng, c, i % c.classes, "m" + std::to_string(i));
    for (Tensor* t : {&b.v_g, &b.t_g, &b.v, &b.t}) *t = tot::numkit::round_to_f32(*t);
    out.push_back(std::move(b));
  }
  return out;
}

std::string load_error(const std::filesystem::path& p) {
  try {
    load_dataset(p);
  } catch (const tot::LoadError& e) {
    return e.what();
  }
  return "";
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Dataset, RoundTripIsBitwise) {
  TempDir dir("ds");
  const auto c = tot::testing::tiny_config();
  const auto samples = f32_bundles(5, c, 1);
  const auto path = write_dataset(dir.path(), shape_of(c, "train"), samples);
  const Dataset ds = load_dataset(path);
  ASSERT_EQ(ds.samples.size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) EXPECT_EQ(ds.samples[i], samples[i]);
  EXPECT_EQ(ds.manifest.split, "train");
  EXPECT_EQ(ds.classes(), 2u);
}

TEST(Dataset, EmptySplitRejected) {
  TempDir dir("ds");
  const auto path = write_dataset(dir.path(), shape_of(tot::testing::tiny_config(), "test"), {});
  EXPECT_NE(load_error(path).find("no samples"), std::string::npos);
}

TEST(Dataset, ShortGlobalVectorNamesTheSample) {
  TempDir dir("ds");
  auto c = tot::testing::tiny_config();
  c.d_h = 512;
  c.n_p2 = 2;
  c.n_s = 2;
  auto samples = f32_bundles(3, c, 2);
  const auto path = write_dataset(dir.path(), shape_of(c, "train"), samples);
  // Rewrite sample m1 with a 511-wide v_g behind the manifest's back.
  samples[1].v_g = Tensor::zeros(1, 511).reshaped({511});
  std::vector<std::uint8_t> blob;
  auto m = nlohmann::json::parse(std::ifstream(path));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    m["samples"][i]["offset"] = blob.size();
    const std::size_t start = blob.size();
    for (const Tensor* t : {&samples[i].v_g, &samples[i].t_g, &samples[i].v, &samples[i].t})
      tot::numkit::append_tensor(blob, *t);
    m["samples"][i]["crc32"] = crc32(crc32(0L, Z_NULL, 0), blob.data() + start, static_cast<uInt>(blob.size() - start));
  }
  std::ofstream(dir / "train.bin", std::ios::binary).write(reinterpret_cast<const char*>(blob.data()), blob.size());
  std::ofstream(path) << m.dump();
  const std::string err = load_error(path);
  EXPECT_NE(err.find("m1"), std::string::npos) << err;
  EXPECT_NE(err.find("v_g"), std::string::npos) << err;
}

TEST(Dataset, ChecksumMismatchNamesTheSample) {
  TempDir dir("ds");
  const auto c = tot::testing::tiny_config();
  const auto path = write_dataset(dir.path(), shape_of(c, "train"), f32_bundles(3, c, 3));
  auto m = nlohmann::json::parse(std::ifstream(path));
  const std::size_t offset = m["samples"][2]["offset"].get<std::size_t>();
  std::fstream blob(dir / "train.bin", std::ios::in | std::ios::out | std::ios::binary);
  blob.seekp(static_cast<std::streamoff>(offset + 20));
  blob.put('\x7f');
  blob.close();
  const std::string err = load_error(path);
  EXPECT_NE(err.find("m2"), std::string::npos) << err;
  EXPECT_NE(err.find("checksum"), std::string::npos) << err;
}

TEST(Dataset, LabelOutOfRangeRejected) {
  TempDir dir("ds");
  const auto c = tot::testing::tiny_config();
  auto samples = f32_bundles(2, c, 4);
  samples[0].label = 5;
  EXPECT_THROW(write_dataset(dir.path(), shape_of(c, "train"), samples), tot::LoadError);
}

TEST(Dataset, IndexResolvesSplits) {
  TempDir dir("ds");
  SynthSpec spec;
  spec.n_train = 4;
  spec.n_valid = 2;
  spec.n_test = 2;
  const auto index = write_synth(dir.path(), spec);
  EXPECT_EQ(resolve_split(index, "valid"), dir / "valid.json");
  EXPECT_THROW(resolve_split(index, "holdout"), tot::InputError);
  EXPECT_EQ(resolve_split(dir / "test.json", "test"), dir / "test.json");
  EXPECT_THROW(resolve_split(dir / "test.json", "train"), tot::InputError);
  EXPECT_EQ(load_dataset(resolve_split(index, "train")).samples.size(), 4u);
}

TEST(Synth, BalancedClassesAtZeroNoise) {
  for (std::size_t c : {2u, 3u}) {
    SynthSpec spec;
    spec.classes = c;
    spec.noise = 0.0;
    spec.global_noise = 0.0;
    spec.n_train = 300;
    spec.n_valid = 60;
    spec.n_test = 60;
    const auto s = synth_dataset(spec);
    for (const auto* split : {&s.train, &s.valid, &s.test}) {
      std::vector<std::size_t> count(c, 0);
      for (const auto& b : *split) ++count[b.label];
      for (std::size_t k = 0; k < c; ++k) EXPECT_EQ(count[k], split->size() / c);
    }
  }
}

TEST(Synth, LabelIsSharedConceptCountAtZeroNoise) {
  SynthSpec spec;
  spec.classes = 3;
  spec.noise = 0.0;
  spec.n_train = 90;
  const auto s = synth_dataset(spec);
  for (const auto& b : s.train) {
    std::set<std::vector<double>> image, text;
    for (std::size_t r = 0; r < b.v.rows(); ++r) image.insert({b.v.row_span(r).begin(), b.v.row_span(r).end()});
    for (std::size_t r = 0; r < b.t.rows(); ++r) text.insert({b.t.row_span(r).begin(), b.t.row_span(r).end()});
    std::size_t shared = 0;
    for (const auto& v : text) shared += image.count(v);
    EXPECT_EQ(shared, b.label) << b.id;
  }
}

TEST(Synth, SameSeedSameBytes) {
  TempDir a("synth"), b("synth");
  SynthSpec spec;
  spec.n_train = 20;
  spec.n_valid = 10;
  spec.n_test = 10;
  write_synth(a.path(), spec);
  write_synth(b.path(), spec);
  for (const char* f : {"dataset.json", "train.json", "train.bin", "valid.bin", "test.json", "test.bin"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  spec.seed = 8;
  TempDir c("synth");
  write_synth(c.path(), spec);
  EXPECT_NE(slurp(a / "train.bin"), slurp(c / "train.bin"));
}

TEST(Synth, RejectsImpossibleSpecs) {
  SynthSpec spec;
  spec.classes = 4;
  EXPECT_THROW(synth_dataset(spec), tot::ConfigError);
  spec.classes = 2;
  spec.concepts = 3;
  EXPECT_THROW(synth_dataset(spec), tot::ConfigError);
}
