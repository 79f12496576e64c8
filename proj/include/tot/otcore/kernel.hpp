#pragma once

#include <cstddef>
#include <cstdint>

#include "tot/numkit/tape.hpp"
#include "tot/numkit/tensor.hpp"

namespace tot::otcore {

using numkit::Tensor;
using numkit::Var;

struct KernelConfig {
  double sigma = 1.0;              // Gaussian bandwidth
  std::size_t feature_dim = 256;   // random Fourier feature count
  std::uint64_t rff_seed = 0x70751eedULL;

  // Throws ConfigError on sigma <= 0 or feature_dim == 0.
  void validate() const;
};

// K_ij = exp(-|x_i - y_j|^2 / (2 sigma^2)). X is n x d, Y is m x d.
Tensor gaussian_gram(const Tensor& x, const Tensor& y, const KernelConfig& cfg);
Var gaussian_gram(Var x, Var y, double sigma);

// Pairwise alignment cost C = 1 - K. Entries lie in [0, 1] and vanish only
// for coincident points, so the minimum-cost plan maximises kernel alignment.
struct CostMatrix {
  Tensor values;
};

CostMatrix cost_matrix(const Tensor& x, const Tensor& y, const KernelConfig& cfg);
Var cost_matrix(Var x, Var y, const KernelConfig& cfg);

// Finite stand-in for the Gaussian kernel's feature map:
//   phi(x) = sqrt(2/D) cos(x W + b),  W ~ N(0, 1/sigma^2), b ~ U[0, 2 pi)
// so <phi(x), phi(y)> -> kappa(x, y) as D grows. Frequencies are drawn once
// from cfg.rff_seed; the same seed and input dim give the same map.
class RffEmbedding {
 public:
  RffEmbedding(std::size_t input_dim, const KernelConfig& cfg);

  std::size_t input_dim() const { return frequencies_.rows(); }
  std::size_t feature_dim() const { return frequencies_.cols(); }

  Tensor embed(const Tensor& x) const;
  Var embed(Var x) const;

 private:
  Tensor frequencies_;  // input_dim x D
  Tensor phases_;       // 1 x D
  double amplitude_;
};

Tensor rkhs_embed(const Tensor& x, const KernelConfig& cfg);

}  // namespace tot::otcore
