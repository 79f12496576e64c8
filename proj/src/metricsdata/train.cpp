#include "tot/metricsdata/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "tot/errors.hpp"
#include "tot/fusionhead/head.hpp"
#include "tot/otcore/sinkhorn.hpp"

namespace tot::metricsdata {

std::string to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

Optimizer parse_optimizer(const std::string& s) {
  if (s == "adam") return Optimizer::Adam;
  if (s == "sgd") return Optimizer::Sgd;
  throw ConfigError("optimizer must be 'adam' or 'sgd', got '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be a finite value >= 0");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (threads == 0) throw ConfigError("threads must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0,1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0,1)");
  if (!(adam_eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

std::string csv_header() { return "epoch,split,acc,macro_f1,mmae,loss"; }

std::string csv_row(const EpochRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%s,%.6f,%.6f,%.6f,%.6f", r.epoch, r.split.c_str(), r.metrics.acc,
                r.metrics.macro_f1, r.metrics.mmae, r.loss);
  return buf;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

class Stepper {
 public:
  Stepper(const TrainConfig& cfg, const ParamStore& params) : cfg_(cfg), m_(params.zero_grads()), v_(params.zero_grads()) {}

  void step(ParamStore& params, const numkit::Gradients& g, const std::vector<bool>& frozen) {
    ++t_;
    const double b1t = 1.0 - std::pow(cfg_.beta1, t_), b2t = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (frozen[p]) continue;
      auto w = params[p].value.data();
      auto gp = g[p].data();
      auto m = m_[p].data();
      auto v = v_[p].data();
      if (cfg_.optimizer == Optimizer::Adam) {
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gp[i];
          v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gp[i] * gp[i];
          w[i] -= cfg_.lr * (m[i] / b1t) / (std::sqrt(v[i] / b2t) + cfg_.adam_eps);
        }
      } else {
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = cfg_.momentum * m[i] + gp[i];
          w[i] -= cfg_.lr * m[i];
        }
      }
    }
  }

 private:
  const TrainConfig& cfg_;
  numkit::Gradients m_, v_;
  int t_ = 0;
};

void check_compatible(const Model& model, const Dataset& d) {
  const auto& c = model.config();
  const auto& m = d.manifest;
  if (m.d_h != c.d_h || m.n_p2 != c.n_p2 || m.n_s != c.n_s || m.classes.size() != c.classes) {
    throw ConfigError("dataset '" + m.split + "' has d_h=" + std::to_string(m.d_h) + " n_p2=" + std::to_string(m.n_p2) +
                      " n_s=" + std::to_string(m.n_s) + " classes=" + std::to_string(m.classes.size()) +
                      ", model expects d_h=" + std::to_string(c.d_h) + " n_p2=" + std::to_string(c.n_p2) +
                      " n_s=" + std::to_string(c.n_s) + " classes=" + std::to_string(c.classes));
  }
}

std::vector<std::size_t> labels_of(const Dataset& d) {
  std::vector<std::size_t> out;
  for (const auto& s : d.samples) out.push_back(s.label);
  return out;
}

}  // namespace

EvalResult evaluate(const Model& model, const Dataset& data, unsigned threads) {
  check_compatible(model, data);
  const std::size_t n = data.samples.size();
  EvalResult r;
  r.preds.resize(n);
  std::vector<double> losses(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const Tensor p = model.predict_proba(data.samples[i]);
    r.preds[i] = argmax(p.data());
    losses[i] = fusionhead::cross_entropy(p.data(), data.samples[i].label);
  });
  r.loss = fusionhead::mean_loss(losses);
  r.metrics = compute_metrics(r.preds, labels_of(data), data.classes());
  return r;
}

TrainResult train(Model& model, const Dataset& train_set, const Dataset* valid_set, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  check_compatible(model, train_set);
  if (valid_set) check_compatible(model, *valid_set);
  ParamStore& params = model.params();
  Stepper stepper(cfg, params);
  std::mt19937_64 rng(cfg.seed);
  const std::size_t n = train_set.samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto train_labels = labels_of(train_set);

  TrainResult result;
  result.best_params = params;
  if (hooks.csv) *hooks.csv << csv_header() << '\n';

  std::vector<bool> frozen(params.size(), false);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto sinkhorn_before = otcore::sinkhorn_call_count();
    if (cfg.split_train) {
      const bool graph_turn = epoch % 2 == 1;
      for (std::size_t p = 0; p < params.size(); ++p)
        frozen[p] = graph_turn ? model.is_attention_param(p) : model.is_graph_param(p);
    }
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> preds(n), labels(n);
    std::vector<double> losses(n);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      std::vector<numkit::Gradients> slots(count);
      parallel_for(count, cfg.threads, [&](std::size_t k) {
        const std::size_t idx = order[start + k];
        slots[k] = params.zero_grads();
        losses[start + k] = model.loss_and_grad(train_set.samples[idx], slots[k], &preds[start + k]);
        labels[start + k] = train_labels[idx];
      });
      numkit::Gradients grad = std::move(slots[0]);
      for (std::size_t k = 1; k < count; ++k)
        for (std::size_t p = 0; p < grad.size(); ++p) {
          auto dst = grad[p].data();
          auto src = slots[k][p].data();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
      for (auto& g : grad)
        for (double& x : g.data()) x /= static_cast<double>(count);
      for (std::size_t k = 0; k < count; ++k) {
        if (!std::isfinite(losses[start + k])) {
          throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
        }
      }
      if (hooks.on_batch) hooks.on_batch(epoch, grad);
      stepper.step(params, grad, frozen);
    }

    EpochRecord tr{epoch, "train", compute_metrics(preds, labels, train_set.classes()), fusionhead::mean_loss(losses)};
    result.history.push_back(tr);
    if (hooks.csv) *hooks.csv << csv_row(tr) << '\n';
    double score = tr.metrics.macro_f1;
    if (valid_set) {
      const EvalResult ev = evaluate(model, *valid_set, cfg.threads);
      EpochRecord vr{epoch, "valid", ev.metrics, ev.loss};
      result.history.push_back(vr);
      if (hooks.csv) *hooks.csv << csv_row(vr) << '\n';
      score = ev.metrics.macro_f1;
    }
    if (!valid_set || score > result.best_macro_f1) {
      result.best_macro_f1 = score;
      result.best_epoch = epoch;
      result.best_params = params;
    }
    if (hooks.log) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "epoch %d train_loss=%.6f train_acc=%.4f", epoch, tr.loss, tr.metrics.acc);
      *hooks.log << buf;
      if (valid_set) {
        const auto& v = result.history.back();
        std::snprintf(buf, sizeof buf, " valid_loss=%.6f valid_acc=%.4f valid_f1=%.4f", v.loss, v.metrics.acc,
                      v.metrics.macro_f1);
        *hooks.log << buf;
      }
      *hooks.log << '\n';
      const auto calls = otcore::sinkhorn_call_count() - sinkhorn_before;
      if (calls > 0) *hooks.log << "sinkhorn calls=" << calls << " epoch=" << epoch << '\n';
    }
  }
  return result;
}

}  // namespace tot::metricsdata
