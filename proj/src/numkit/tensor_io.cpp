#include "tot/numkit/tensor_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <string>

#include "tot/errors.hpp"

namespace tot::numkit {
namespace {

constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  if (offset + 4 > bytes.size()) throw LoadError("tensor blob truncated at byte " + std::to_string(offset));
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  offset += 4;
  return v;
}

}  // namespace

std::size_t encoded_size(const Shape& shape) { return 4 + 4 * shape.size() + 4 * element_count(shape); }

void append_tensor(std::vector<std::uint8_t>& out, const Tensor& t) {
  out.reserve(out.size() + encoded_size(t.shape()));
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  const std::uint32_t rank = get_u32(bytes, offset);
  if (rank == 0 || rank > kMaxRank) throw LoadError("implausible tensor rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) d = get_u32(bytes, offset);
  const std::size_t n = element_count(shape);
  if (offset + 4 * n > bytes.size()) {
    throw LoadError("tensor payload " + to_string(shape) + " runs past end of blob");
  }
  std::vector<double> data(n);
  for (auto& v : data) v = static_cast<double>(std::bit_cast<float>(get_u32(bytes, offset)));
  return Tensor(std::move(shape), std::move(data));
}

void write_tensor(std::ostream& out, const Tensor& t) {
  std::vector<std::uint8_t> bytes;
  append_tensor(bytes, t);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Tensor read_tensor(std::istream& in) {
  std::vector<std::uint8_t> header(4);
  if (!in.read(reinterpret_cast<char*>(header.data()), 4)) throw LoadError("tensor stream truncated");
  std::size_t off = 0;
  const std::uint32_t rank = get_u32(header, off);
  if (rank == 0 || rank > kMaxRank) throw LoadError("implausible tensor rank " + std::to_string(rank));
  header.resize(4 + 4 * rank);
  if (!in.read(reinterpret_cast<char*>(header.data()) + 4, 4 * rank)) throw LoadError("tensor stream truncated");
  Shape shape(rank);
  for (auto& d : shape) d = get_u32(header, off);
  const std::size_t payload = 4 * element_count(shape);
  header.resize(header.size() + payload);
  if (!in.read(reinterpret_cast<char*>(header.data()) + 4 + 4 * rank, static_cast<std::streamsize>(payload))) {
    throw LoadError("tensor stream truncated");
  }
  off = 0;
  return decode_tensor(header, off);
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open " + path.string() + " for writing");
  write_tensor(out, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  return read_tensor(in);
}

Tensor round_to_f32(Tensor t) {
  for (double& v : t.data()) v = static_cast<double>(static_cast<float>(v));
  return t;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace tot::numkit
