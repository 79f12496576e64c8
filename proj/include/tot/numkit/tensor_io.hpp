#pragma once

// Shared tensor binary layout:
//   u32 rank, u32 dims[rank], f32 payload[prod(dims)] (row-major)
// all little-endian. Values widen to double on read; writing narrows to f32.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "tot/numkit/tensor.hpp"

namespace tot::numkit {

std::size_t encoded_size(const Shape& shape);
void append_tensor(std::vector<std::uint8_t>& out, const Tensor& t);
// Reads one tensor starting at `offset` and advances it. Throws LoadError on
// truncation or an implausible header.
Tensor decode_tensor(std::span<const std::uint8_t> bytes, std::size_t& offset);

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

// Rounds every entry to the nearest f32, so a write/read cycle is exact.
Tensor round_to_f32(Tensor t);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace tot::numkit
