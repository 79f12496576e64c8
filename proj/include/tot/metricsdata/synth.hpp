#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "tot/metricsdata/dataset.hpp"

namespace tot::metricsdata {

// Synthetic memes whose label lives only in the cross-modal correspondence.
// Each sample draws a few concept vectors per modality from a shared pool;
// the label is the number of concepts the image and the text have in common
// (0/1 for two classes, 0/1/2 for three). Patches and tokens are noisy
// copies of their modality's concepts. The global vectors are noisy means of
// the concepts, so each modality on its own is label-independent.
struct SynthSpec {
  std::size_t classes = 2;
  std::size_t n_train = 400, n_valid = 100, n_test = 100;
  double noise = 0.1;         // norm of the perturbation on patches and tokens
  double global_noise = 0.1;  // norm of the perturbation on the global vectors
  std::size_t d_h = 32;
  std::size_t n_p2 = 16;
  std::size_t n_s = 12;
  std::size_t concepts = 12;      // pool size
  std::size_t per_modality = 2;   // concepts per image and per text
  std::uint64_t seed = 7;

  // Throws ConfigError on impossible combinations.
  void validate() const;
};

struct SynthSplits {
  DatasetManifest shape;  // dimensions and class names, no samples
  std::vector<FeatureBundle> train, valid, test;
};

SynthSplits synth_dataset(const SynthSpec& spec);

// Writes train/valid/test manifests and blobs plus <dir>/dataset.json, the
// index. Returns the index path.
std::filesystem::path write_synth(const std::filesystem::path& dir, const SynthSpec& spec);

}  // namespace tot::metricsdata
