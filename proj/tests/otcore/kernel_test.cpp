#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "support/random.hpp"
#include "tot/errors.hpp"
#include "tot/numkit/gradcheck.hpp"
#include "tot/numkit/ops.hpp"
#include "tot/otcore/kernel.hpp"

using namespace tot::otcore;
using tot::numkit::Tape;

namespace {

double inner(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) s += a(i, c) * b(j, c);
  return s;
}

// Mean |<phi(x), phi(y)> - kappa(x, y)| over `pairs` random pairs.
double rff_error(std::size_t feature_dim, int pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  KernelConfig cfg{.sigma = 1.0, .feature_dim = feature_dim, .rff_seed = 99};
  Tensor x = tot::testing::random_tensor(rng, pairs, 4, -0.6, 0.6);
  Tensor y = tot::testing::random_tensor(rng, pairs, 4, -0.6, 0.6);
  RffEmbedding map(4, cfg);
  Tensor px = map.embed(x), py = map.embed(y);
  Tensor k = gaussian_gram(x, y, cfg);
  double err = 0.0;
  for (int p = 0; p < pairs; ++p) err += std::abs(inner(px, p, py, p) - k(p, p));
  return err / pairs;
}

}  // namespace

TEST(GaussianGram, SelfSimilarityIsExactlyOne) {
  std::mt19937_64 rng(4);
  Tensor x = tot::testing::random_tensor(rng, 5, 7, -3, 3);
  Tensor k = gaussian_gram(x, x, {});
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(k(i, i), 1.0);
}

TEST(GaussianGram, HalfAtAnalyticDistance) {
  Tensor x = Tensor::matrix({{0.0}});
  Tensor y = Tensor::matrix({{std::sqrt(2.0 * std::log(2.0))}});
  EXPECT_NEAR(gaussian_gram(x, y, {.sigma = 1.0})(0, 0), 0.5, 1e-15);
}

TEST(GaussianGram, SymmetricAndPositiveSemidefinite) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = tot::testing::random_tensor(rng, 6, 3);
    Tensor k = gaussian_gram(x, x, {.sigma = 0.7});
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(k(i, j), k(j, i));
    EXPECT_GE(tot::testing::min_eigenvalue_jacobi(k), -1e-10);
  }
}

TEST(GaussianGram, RejectsBadSigmaAndMismatchedDims) {
  EXPECT_THROW(gaussian_gram(Tensor::zeros(1, 2), Tensor::zeros(1, 2), {.sigma = 0.0}), tot::ConfigError);
  EXPECT_THROW(gaussian_gram(Tensor::zeros(1, 2), Tensor::zeros(1, 2), {.sigma = -1.0}), tot::ConfigError);
  EXPECT_THROW(gaussian_gram(Tensor::zeros(1, 2), Tensor::zeros(1, 3), {}), tot::DimensionError);
}

TEST(GaussianGram, TapeGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  Tensor x = tot::testing::random_tensor(rng, 4, 3), y = tot::testing::random_tensor(rng, 5, 3);
  Tensor w = tot::testing::random_tensor(rng, 4, 5);
  auto wrt_x = [&](Tape& t, Var v) {
    return tot::numkit::sum(tot::numkit::mul(gaussian_gram(v, t.constant(y), 0.8), t.constant(w)));
  };
  auto wrt_y = [&](Tape& t, Var v) {
    return tot::numkit::sum(tot::numkit::mul(gaussian_gram(t.constant(x), v, 0.8), t.constant(w)));
  };
  EXPECT_LT(tot::numkit::grad_check(wrt_x, x).max_error, 1e-6);
  EXPECT_LT(tot::numkit::grad_check(wrt_y, y).max_error, 1e-6);
}

TEST(CostMatrix, CoincidentPointHasZeroCost) {
  Tensor x = Tensor::matrix({{0.3, -0.2}});
  EXPECT_EQ(cost_matrix(x, x, {}).values, Tensor::matrix({{0.0}}));
}

TEST(CostMatrix, FarPointsApproachOne) {
  Tensor x = Tensor::matrix({{0.0, 0.0}});
  Tensor y = Tensor::matrix({{40.0, 0.0}});
  EXPECT_NEAR(cost_matrix(x, y, {.sigma = 1.0}).values(0, 0), 1.0, 1e-12);
}

TEST(CostMatrix, ArgminCostIsArgmaxKernelAndEntriesInUnitInterval) {
  std::mt19937_64 rng(15);
  KernelConfig cfg{.sigma = 0.9};
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = tot::testing::random_tensor(rng, 5, 3), y = tot::testing::random_tensor(rng, 7, 3);
    Tensor c = cost_matrix(x, y, cfg).values, k = gaussian_gram(x, y, cfg);
    for (std::size_t i = 0; i < 5; ++i) {
      std::size_t amin = 0, amax = 0;
      for (std::size_t j = 0; j < 7; ++j) {
        EXPECT_GE(c(i, j), 0.0);
        EXPECT_LE(c(i, j), 1.0);
        if (c(i, j) < c(i, amin)) amin = j;
        if (k(i, j) > k(i, amax)) amax = j;
      }
      EXPECT_EQ(amin, amax);
    }
  }
}

TEST(CostMatrix, TapeAndPlainAgree) {
  std::mt19937_64 rng(16);
  Tensor x = tot::testing::random_tensor(rng, 3, 4), y = tot::testing::random_tensor(rng, 2, 4);
  Tape tape;
  KernelConfig cfg{.sigma = 1.3};
  EXPECT_EQ(cost_matrix(tape.constant(x), tape.constant(y), cfg).value(), cost_matrix(x, y, cfg).values);
}

TEST(Rff, SelfInnerProductNearOneAt2048) {
  std::mt19937_64 rng(21);
  Tensor x = tot::testing::random_tensor(rng, 10, 5);
  Tensor phi = rkhs_embed(x, {.sigma = 1.0, .feature_dim = 2048, .rff_seed = 3});
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(inner(phi, i, phi, i), 1.0, 0.05);
}

TEST(Rff, SameSeedIsBitwiseIdentical) {
  std::mt19937_64 rng(22);
  Tensor x = tot::testing::random_tensor(rng, 4, 6);
  KernelConfig cfg{.feature_dim = 64, .rff_seed = 1234};
  EXPECT_EQ(rkhs_embed(x, cfg), rkhs_embed(x, cfg));
  KernelConfig other = cfg;
  other.rff_seed = 1235;
  EXPECT_NE(rkhs_embed(x, cfg), rkhs_embed(x, other));
}

TEST(Rff, ErrorShrinksWithFeatureCount) {
  const double coarse = rff_error(128, 100, 5);
  const double fine = rff_error(2048, 100, 5);
  EXPECT_LT(fine, coarse);
  EXPECT_LT(fine, 0.05);
}

TEST(Rff, TapeMatchesPlainAndIsDifferentiable) {
  std::mt19937_64 rng(23);
  Tensor x = tot::testing::random_tensor(rng, 3, 4);
  KernelConfig cfg{.sigma = 0.8, .feature_dim = 16};
  RffEmbedding map(4, cfg);
  Tape tape;
  EXPECT_EQ(map.embed(tape.constant(x)).value(), map.embed(x));
  Tensor w = tot::testing::random_tensor(rng, 3, 16);
  auto f = [&](Tape& t, Var v) { return tot::numkit::sum(tot::numkit::mul(map.embed(v), t.constant(w))); };
  EXPECT_LT(tot::numkit::grad_check(f, x).max_error, 1e-6);
  EXPECT_THROW(map.embed(Tensor::zeros(2, 5)), tot::DimensionError);
}
