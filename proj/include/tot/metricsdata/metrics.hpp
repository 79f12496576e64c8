#pragma once

#include <cstddef>
#include <span>

namespace tot::metricsdata {

struct Metrics {
  double acc = 0.0;
  double macro_f1 = 0.0;
  // Macro-averaged mean absolute error over ordinal class indices: for each
  // class present in the labels, the mean |pred - true| over its samples,
  // then averaged over those classes.
  double mmae = 0.0;
};

// Macro-F1 averages per-class F1 over the classes that occur in `labels`.
// Throws InputError on length mismatch, empty input or out-of-range indices.
Metrics compute_metrics(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t classes);

}  // namespace tot::metricsdata
