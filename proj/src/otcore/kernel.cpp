#include "tot/otcore/kernel.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "tot/errors.hpp"
#include "tot/numkit/kernels.hpp"
#include "tot/numkit/ops.hpp"

namespace tot::otcore {

void KernelConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("kernel sigma must be positive, got " + std::to_string(sigma));
  if (feature_dim == 0) throw ConfigError("RFF feature dimension must be at least 1");
}

namespace {

void check_feature_dims(const Tensor& x, const Tensor& y) {
  numkit::require_rank2(x, "gaussian_gram");
  numkit::require_rank2(y, "gaussian_gram");
  if (x.cols() != y.cols()) {
    throw DimensionError("gaussian_gram: feature dimensions disagree, " + numkit::to_string(x.shape()) + " vs " +
                         numkit::to_string(y.shape()));
  }
}

Tensor gram_values(const Tensor& x, const Tensor& y, double sigma) {
  check_feature_dims(x, y);
  const auto& k = numkit::kernels::active();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  const std::size_t d = x.cols();
  Tensor out = Tensor::zeros(x.rows(), y.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < y.rows(); ++j)
      out(i, j) = std::exp(-k.sqdist(x.data().data() + i * d, y.data().data() + j * d, d) * inv);
  return out;
}

}  // namespace

Tensor gaussian_gram(const Tensor& x, const Tensor& y, const KernelConfig& cfg) {
  cfg.validate();
  return gram_values(x, y, cfg.sigma);
}

Var gaussian_gram(Var x, Var y, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("kernel sigma must be positive, got " + std::to_string(sigma));
  // dK_ij/dx_i = -K_ij (x_i - y_j) / sigma^2, and the negation for y_j.
  return x.tape().record("gaussian_gram", gram_values(x.value(), y.value(), sigma), {x, y},
                         [x, y, sigma](numkit::Tape& t, const Tensor& kv, const Tensor& g) {
                           const Tensor& xv = t.value(x);
                           const Tensor& yv = t.value(y);
                           const double inv = 1.0 / (sigma * sigma);
                           const bool gx_on = t.requires_grad(x), gy_on = t.requires_grad(y);
                           Tensor* gx = gx_on ? &t.grad_buffer(x) : nullptr;
                           Tensor* gy = gy_on ? &t.grad_buffer(y) : nullptr;
                           for (std::size_t i = 0; i < xv.rows(); ++i) {
                             for (std::size_t j = 0; j < yv.rows(); ++j) {
                               const double w = g(i, j) * kv(i, j) * inv;
                               if (w == 0.0) continue;
                               for (std::size_t c = 0; c < xv.cols(); ++c) {
                                 const double diff = xv(i, c) - yv(j, c);
                                 if (gx) (*gx)(i, c) -= w * diff;
                                 if (gy) (*gy)(j, c) += w * diff;
                               }
                             }
                           }
                         });
}

CostMatrix cost_matrix(const Tensor& x, const Tensor& y, const KernelConfig& cfg) {
  Tensor k = gaussian_gram(x, y, cfg);
  for (double& v : k.data()) v = 1.0 - v;
  return {std::move(k)};
}

Var cost_matrix(Var x, Var y, const KernelConfig& cfg) {
  cfg.validate();
  return numkit::add_scalar(numkit::scale(gaussian_gram(x, y, cfg.sigma), -1.0), 1.0);
}

RffEmbedding::RffEmbedding(std::size_t input_dim, const KernelConfig& cfg)
    : frequencies_(Tensor::zeros(input_dim, cfg.feature_dim)),
      phases_(Tensor::zeros(1, cfg.feature_dim)),
      amplitude_(std::sqrt(2.0 / static_cast<double>(cfg.feature_dim))) {
  cfg.validate();
  std::mt19937_64 rng(cfg.rff_seed);
  std::normal_distribution<double> freq(0.0, 1.0 / cfg.sigma);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (double& w : frequencies_.data()) w = freq(rng);
  for (double& b : phases_.data()) b = phase(rng);
}

Tensor RffEmbedding::embed(const Tensor& x) const {
  numkit::require_rank2(x, "rkhs_embed");
  if (x.cols() != input_dim()) {
    throw DimensionError("rkhs_embed: input " + numkit::to_string(x.shape()) + " does not match map input dim " +
                         std::to_string(input_dim()));
  }
  Tensor z = numkit::matmul(x, frequencies_);
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) = amplitude_ * std::cos(z(i, j) + phases_[j]);
  return z;
}

Var RffEmbedding::embed(Var x) const {
  if (x.cols() != input_dim()) {
    throw DimensionError("rkhs_embed: input " + numkit::to_string(x.shape()) + " does not match map input dim " +
                         std::to_string(input_dim()));
  }
  auto& tape = x.tape();
  Var z = numkit::add_row(numkit::matmul(x, tape.constant(frequencies_)), tape.constant(phases_));
  return numkit::scale(numkit::cos(z), amplitude_);
}

Tensor rkhs_embed(const Tensor& x, const KernelConfig& cfg) { return RffEmbedding(x.cols(), cfg).embed(x); }

}  // namespace tot::otcore
