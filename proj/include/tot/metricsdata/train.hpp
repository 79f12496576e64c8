#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tot/metricsdata/dataset.hpp"
#include "tot/metricsdata/metrics.hpp"
#include "tot/metricsdata/model.hpp"

namespace tot::metricsdata {

enum class Optimizer { Adam, Sgd };

std::string to_string(Optimizer o);
Optimizer parse_optimizer(const std::string& s);

struct TrainConfig {
  Optimizer optimizer = Optimizer::Adam;
  double lr = 1e-3;
  double momentum = 0.9;  // SGD only
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::size_t batch_size = 16;
  int epochs = 20;
  std::uint64_t seed = 7;  // shuffling
  unsigned threads = 1;
  // Alternate epochs between the graph branch and the REG branch, freezing
  // the other; the classifier head trains throughout.
  bool split_train = false;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  std::string split;
  Metrics metrics;
  double loss = 0.0;
};

std::string csv_header();  // epoch,split,acc,macro_f1,mmae,loss
std::string csv_row(const EpochRecord& r);

struct TrainHooks {
  std::ostream* log = nullptr;
  std::ostream* csv = nullptr;  // header written by train()
  // Sees each batch's mean gradient before the update.
  std::function<void(int epoch, const numkit::Gradients&)> on_batch;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_macro_f1 = -1.0;
  ParamStore best_params;  // by valid macro-F1, or the last epoch without a valid split
};

// Mini-batch training on the mean cross-entropy. Per-sample gradients are
// summed in sample order, so results do not depend on the thread count.
// Throws NumericError when the loss stops being finite.
TrainResult train(Model& model, const Dataset& train_set, const Dataset* valid_set, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

struct EvalResult {
  Metrics metrics;
  double loss = 0.0;
  std::vector<std::size_t> preds;
};

EvalResult evaluate(const Model& model, const Dataset& data, unsigned threads = 1);

// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first
// failure.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace tot::metricsdata
