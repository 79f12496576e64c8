#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "tot/numkit/tape.hpp"

namespace tot::numkit {

// Relative error |g - fd| / max(|g|, |fd|); falls back to the absolute
// difference when both magnitudes are below absolute_floor.
struct GradCheckOptions {
  double step = 1e-4;
  double absolute_floor = 1e-8;
};

struct GradCheckResult {
  double max_error = 0.0;
  std::size_t checked = 0;
  // Coordinates whose +/- probes landed on a different ReLU branch than the
  // base point; the central difference is not a derivative oracle there.
  std::size_t skipped = 0;
  std::size_t worst_index = 0;
};

double gradient_error(double analytic, double numeric, double absolute_floor);

// Compares the tape gradient of a scalar function of one tensor against
// central finite differences. Throws NumericError if f is not finite at a
// probe point.
GradCheckResult grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& theta,
                           const GradCheckOptions& options = {});

struct ParamCheck {
  std::string name;
  GradCheckResult result;
};

// Same check for every tensor in a parameter store. loss(tape) must read the
// parameters through tape.param(store, ...); the store is perturbed in place
// and restored before returning.
std::vector<ParamCheck> grad_check_params(const std::function<Var(Tape&)>& loss, ParamStore& store,
                                          const GradCheckOptions& options = {});

}  // namespace tot::numkit
