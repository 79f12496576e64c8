#pragma once

#include <cstddef>

#include "tot/numkit/tape.hpp"
#include "tot/numkit/tensor.hpp"

namespace tot::otcore {

using numkit::Tensor;
using numkit::Var;

// Re-expresses source features at target slots: scale * P^T phi_src.
// P is n_src x n_tgt (rows index the transported modality), phi_src is
// n_src x d; the result has one node per target slot, n_tgt x d.
Tensor align_nodes(const Tensor& plan, const Tensor& phi_src, double scale);
Var align_nodes(Var plan, Var phi_src, double scale);

// sqrt(n_src): n_p for the image side (sqrt(n_p^2)), sqrt(n_s) for text.
double alignment_scale(std::size_t n_src);

}  // namespace tot::otcore
