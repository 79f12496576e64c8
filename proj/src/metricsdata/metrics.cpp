#include "tot/metricsdata/metrics.hpp"

#include <string>
#include <vector>

#include "tot/errors.hpp"

namespace tot::metricsdata {

Metrics compute_metrics(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t classes) {
  if (preds.size() != labels.size()) {
    throw InputError("metrics: " + std::to_string(preds.size()) + " predictions for " + std::to_string(labels.size()) +
                     " labels");
  }
  if (labels.empty()) throw InputError("metrics: no samples");
  std::vector<std::size_t> tp(classes, 0), pred_count(classes, 0), true_count(classes, 0);
  std::vector<double> abs_err(classes, 0.0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t p = preds[i], y = labels[i];
    if (p >= classes || y >= classes) throw InputError("metrics: class index out of range");
    ++pred_count[p];
    ++true_count[y];
    if (p == y) {
      ++tp[p];
      ++correct;
    }
    abs_err[y] += p > y ? double(p - y) : double(y - p);
  }
  Metrics m;
  m.acc = static_cast<double>(correct) / static_cast<double>(labels.size());
  std::size_t present = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (true_count[c] == 0) continue;
    ++present;
    // F1 = 2 tp / (2 tp + fp + fn) = 2 tp / (predicted + actual).
    m.macro_f1 += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(pred_count[c] + true_count[c]);
    m.mmae += abs_err[c] / static_cast<double>(true_count[c]);
  }
  m.macro_f1 /= static_cast<double>(present);
  m.mmae /= static_cast<double>(present);
  return m;
}

}  // namespace tot::metricsdata
