#pragma once

#include <span>

#include "tot/numkit/tensor.hpp"

namespace tot::otcore {

using numkit::Tensor;

struct ExactPlan {
  Tensor plan;
  double cost = 0.0;
};

// Unregularised transportation problem  min <C, P>  s.t. P 1 = a, P^T 1 = b,
// P >= 0, solved as a min-cost flow (successive shortest paths with
// Bellman-Ford on the residual bipartite network). Meant as a verification
// oracle for small problems; each side is capped at kMaxExactSide.
//
// Throws InputError for negative marginals or totals differing beyond 1e-9.
ExactPlan exact_ot(const Tensor& cost, std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kMaxExactSide = 128;

}  // namespace tot::otcore
