#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tot/numkit/tape.hpp"
#include "tot/otcore/kernel.hpp"

namespace tot::otcore {

enum class Normalization { Row, Column };

struct SinkhornConfig {
  double epsilon = 0.1;
  int max_iters = 3;
  // Stop early once the marginal not fixed by the final step is within tol.
  // Zero runs exactly max_iters iterations.
  double tol = 0.0;
  // Which marginal the last half-step of each iteration enforces exactly.
  Normalization last = Normalization::Row;

  void validate() const;
};

struct TransportPlan {
  Tensor values;  // n_src x n_tgt, rows index the source
  std::vector<double> src_marginal;
  std::vector<double> tgt_marginal;
  int iterations = 0;
  bool converged = false;
  // Max marginal violation (rows and columns) after each iteration.
  std::vector<double> violation_history;
};

std::vector<double> uniform_marginal(std::size_t n);

// Entropic OT  min_P <C, P> - eps H(P)  over couplings of (a, b), solved by
// alternating row/column scalings of exp(-C/eps) carried out on log-domain
// dual potentials, so small eps never under- or overflows.
//
// One iteration is a pair of half-steps ending with cfg.last. With tol > 0,
// every 32 iterations a Newton solve on the remaining potential is tried as a
// finish; it targets the same fixed point and is kept only if it reaches tol.
// Throws InputError for non-positive or non-normalised marginals.
TransportPlan sinkhorn(const CostMatrix& cost, std::span<const double> a, std::span<const double> b,
                       const SinkhornConfig& cfg);

// Same iterations unrolled onto the tape; the plan is differentiable in C.
Var sinkhorn(Var cost, std::span<const double> a, std::span<const double> b, const SinkhornConfig& cfg);

double transport_cost(const Tensor& cost, const Tensor& plan);
// H(P) = -sum P_ij (log P_ij - 1), with 0 log 0 = 0.
double entropy(const Tensor& plan);
double row_violation(const Tensor& plan, std::span<const double> a);
double col_violation(const Tensor& plan, std::span<const double> b);

// Process-wide count of sinkhorn() invocations (both variants).
std::uint64_t sinkhorn_call_count();

}  // namespace tot::otcore
