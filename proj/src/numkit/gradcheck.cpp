#include "tot/numkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tot/errors.hpp"

namespace tot::numkit {
namespace {

struct Probe {
  double value;
  std::uint64_t signature;
};

template <class Eval>
GradCheckResult compare(const Tensor& analytic, Tensor& theta, Eval eval, std::uint64_t base_signature,
                        const GradCheckOptions& options) {
  GradCheckResult result;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + options.step;
    const Probe plus = eval();
    theta[i] = saved - options.step;
    const Probe minus = eval();
    theta[i] = saved;
    if (!std::isfinite(plus.value) || !std::isfinite(minus.value)) {
      throw NumericError("grad_check: non-finite function value at probe " + std::to_string(i));
    }
    if (plus.signature != base_signature || minus.signature != base_signature) {
      ++result.skipped;
      continue;
    }
    const double numeric = (plus.value - minus.value) / (2.0 * options.step);
    const double err = gradient_error(analytic[i], numeric, options.absolute_floor);
    ++result.checked;
    if (err > result.max_error) {
      result.max_error = err;
      result.worst_index = i;
    }
  }
  return result;
}

double scalar_of(Var v) {
  if (v.value().size() != 1) throw DimensionError("grad_check: function must return a scalar, got " +
                                                  to_string(v.shape()));
  return v.value()[0];
}

}  // namespace

double gradient_error(double analytic, double numeric, double absolute_floor) {
  const double diff = std::abs(analytic - numeric);
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale < absolute_floor ? diff : diff / scale;
}

GradCheckResult grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& theta,
                           const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ConfigError("grad_check step must be positive");
  Tape tape;
  tape.set_track_branches(true);
  Var x = tape.leaf(theta);
  Var y = f(tape, x);
  scalar_of(y);
  tape.backward(y);
  const Tensor analytic = tape.grad(x);
  const std::uint64_t base = tape.branch_signature();

  Tensor probe = theta;
  auto eval = [&]() {
    Tape t;
    t.set_track_branches(true);
    Var out = f(t, t.leaf(probe));
    return Probe{scalar_of(out), t.branch_signature()};
  };
  return compare(analytic, probe, eval, base, options);
}

std::vector<ParamCheck> grad_check_params(const std::function<Var(Tape&)>& loss, ParamStore& store,
                                          const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ConfigError("grad_check step must be positive");
  Gradients grads = store.zero_grads();
  std::uint64_t base = 0;
  {
    Tape tape;
    tape.set_track_branches(true);
    Var y = loss(tape);
    scalar_of(y);
    tape.backward(y);
    tape.accumulate_param_grads(grads);
    base = tape.branch_signature();
  }
  auto eval = [&]() {
    Tape t;
    t.set_track_branches(true);
    Var out = loss(t);
    return Probe{scalar_of(out), t.branch_signature()};
  };
  std::vector<ParamCheck> out;
  out.reserve(store.size());
  for (std::size_t p = 0; p < store.size(); ++p) {
    out.push_back({store[p].name, compare(grads[p], store[p].value, eval, base, options)});
  }
  return out;
}

}  // namespace tot::numkit
