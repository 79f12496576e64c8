#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tot/numkit/tensor.hpp"

namespace tot::metricsdata {

using numkit::Tensor;

// Pre-extracted encoder outputs for one meme.
struct FeatureBundle {
  std::string id;
  std::size_t label = 0;
  Tensor v_g;  // [d_h]
  Tensor t_g;  // [d_h]
  Tensor v;    // [n_p2 x d_h] image patches
  Tensor t;    // [n_s x d_h] text tokens

  friend bool operator==(const FeatureBundle&, const FeatureBundle&) = default;
};

struct SampleRecord {
  std::string id;
  std::size_t label = 0;
  std::uint64_t offset = 0;  // byte offset of the sample in the tensor blob
  std::uint32_t crc32 = 0;   // over the sample's encoded bytes
};

// One split. Class names are ordered by severity so ordinal errors mean
// something; the tensor blob sits next to the manifest.
struct DatasetManifest {
  int version = 1;
  std::size_t d_h = 0;
  std::size_t n_p2 = 0;
  std::size_t n_s = 0;
  std::vector<std::string> classes;
  std::string split;
  std::string tensors;  // blob file name, relative to the manifest
  std::vector<SampleRecord> samples;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<FeatureBundle> samples;

  std::size_t classes() const { return manifest.classes.size(); }
};

// Reads and validates a split manifest and its blob. Throws LoadError naming
// the offending sample on a checksum, shape or label problem, and "no
// samples" for an empty split.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes <dir>/<split>.bin and <dir>/<split>.json; returns the manifest path.
// Shapes are taken from `shape` (d_h, n_p2, n_s, classes, split).
std::filesystem::path write_dataset(const std::filesystem::path& dir, const DatasetManifest& shape,
                                    const std::vector<FeatureBundle>& samples);

// Checks every bundle against the manifest's dimensions; throws LoadError.
void validate_bundle(const FeatureBundle& b, const DatasetManifest& m);

// A dataset index maps split names to manifest files:
//   {"version": 1, "splits": {"train": "train.json", ...}}
void write_index(const std::filesystem::path& path, const std::map<std::string, std::string>& splits);

// Resolves `split` from either an index file or a single split manifest
// (which must carry that split tag, or any tag when `split` is empty).
std::filesystem::path resolve_split(const std::filesystem::path& path, const std::string& split);

std::vector<std::string> default_class_names(std::size_t classes);

}  // namespace tot::metricsdata
