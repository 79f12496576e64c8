#include "tot/otcore/align.hpp"

#include <cmath>
#include <string>

#include "tot/errors.hpp"
#include "tot/numkit/ops.hpp"

namespace tot::otcore {
namespace {

void check(const Tensor& plan, const Tensor& phi) {
  numkit::require_rank2(plan, "align_nodes");
  numkit::require_rank2(phi, "align_nodes");
  if (plan.rows() != phi.rows()) {
    throw DimensionError("align_nodes: plan " + numkit::to_string(plan.shape()) + " does not match source features " +
                         numkit::to_string(phi.shape()));
  }
}

}  // namespace

Tensor align_nodes(const Tensor& plan, const Tensor& phi_src, double scale) {
  check(plan, phi_src);
  Tensor out = numkit::matmul_tn(plan, phi_src);
  for (double& v : out.data()) v *= scale;
  return out;
}

Var align_nodes(Var plan, Var phi_src, double scale) {
  check(plan.value(), phi_src.value());
  return numkit::scale(numkit::matmul_tn(plan, phi_src), scale);
}

double alignment_scale(std::size_t n_src) { return std::sqrt(static_cast<double>(n_src)); }

}  // namespace tot::otcore
