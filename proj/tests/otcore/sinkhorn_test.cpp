#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/random.hpp"
#include "tot/errors.hpp"
#include "tot/numkit/gradcheck.hpp"
#include "tot/numkit/ops.hpp"
#include "tot/otcore/exact_ot.hpp"
#include "tot/otcore/sinkhorn.hpp"

using namespace tot::otcore;
using tot::numkit::Tape;

namespace {

SinkhornConfig converged(double eps) {
  return {.epsilon = eps, .max_iters = 200000, .tol = 1e-9, .last = Normalization::Row};
}

Tensor random_cost(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  return tot::testing::random_tensor(rng, n, m, 0.0, 1.0);
}

}  // namespace

TEST(Sinkhorn, ZeroCostGivesIndependentCoupling) {
  const auto u = uniform_marginal(2);
  const auto plan = sinkhorn({Tensor::zeros(2, 2)}, u, u, {});
  for (double v : plan.values.data()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Sinkhorn, SmallEpsilonApproachesPermutation) {
  const Tensor c = Tensor::matrix({{0, 1}, {1, 0}});
  const auto u = uniform_marginal(2);
  const auto plan = sinkhorn({c}, u, u, converged(0.01));
  const auto exact = exact_ot(c, u, u);
  ASSERT_TRUE(plan.converged);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(plan.values[i], exact.plan[i], 1e-4);
  EXPECT_NEAR(plan.values(0, 0), 0.5, 1e-4);
  EXPECT_NEAR(plan.values(0, 1), 0.0, 1e-4);
}

TEST(Sinkhorn, RowsExactAfterOneRowNormalisation) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = tot::testing::random_dim(rng, 1, 9), m = tot::testing::random_dim(rng, 1, 9);
    const auto a = uniform_marginal(n), b = uniform_marginal(m);
    const auto plan = sinkhorn({random_cost(rng, n, m)}, a, b, {.epsilon = 0.1, .max_iters = 1});
    EXPECT_LT(row_violation(plan.values, a), 1e-12);
  }
}

TEST(Sinkhorn, ColumnModeFixesColumns) {
  std::mt19937_64 rng(4);
  const auto a = uniform_marginal(5), b = uniform_marginal(3);
  const auto plan =
      sinkhorn({random_cost(rng, 5, 3)}, a, b, {.epsilon = 0.1, .max_iters = 3, .last = Normalization::Column});
  EXPECT_LT(col_violation(plan.values, b), 1e-12);
}

TEST(Sinkhorn, NonUniformMarginalsHonoured) {
  std::mt19937_64 rng(5);
  const std::vector<double> a = {0.5, 0.3, 0.2}, b = {0.1, 0.6, 0.3};
  const auto plan = sinkhorn({random_cost(rng, 3, 3)}, a, b, converged(0.05));
  EXPECT_LT(row_violation(plan.values, a), 1e-12);
  EXPECT_LT(col_violation(plan.values, b), 1e-9);
}

TEST(Sinkhorn, ColumnModeConvergesAtSmallEpsilon) {
  std::mt19937_64 rng(12);
  const std::vector<double> a = {0.1, 0.2, 0.3, 0.4}, b = {0.25, 0.15, 0.2, 0.15, 0.25};
  SinkhornConfig cfg = converged(1e-3);
  cfg.last = Normalization::Column;
  const auto plan = sinkhorn({random_cost(rng, 4, 5)}, a, b, cfg);
  ASSERT_TRUE(plan.converged);
  EXPECT_LT(col_violation(plan.values, b), 1e-12);
  EXPECT_LT(row_violation(plan.values, a), 1e-9);
}

TEST(Sinkhorn, InputValidation) {
  const Tensor c = Tensor::zeros(2, 2);
  const auto u = uniform_marginal(2);
  const std::vector<double> zero = {1.0, 0.0};
  const std::vector<double> unnormalised = {0.5, 0.6};
  EXPECT_THROW(sinkhorn({c}, zero, u, {}), tot::InputError);
  EXPECT_THROW(sinkhorn({c}, u, unnormalised, {}), tot::InputError);
  EXPECT_THROW(sinkhorn({c}, uniform_marginal(3), u, {}), tot::DimensionError);
  EXPECT_THROW(sinkhorn({c}, u, u, {.epsilon = 0.0}), tot::ConfigError);
  EXPECT_THROW(sinkhorn({c}, u, u, {.max_iters = 0}), tot::ConfigError);
}

TEST(Sinkhorn, TinyEpsilonStaysFinite) {
  std::mt19937_64 rng(6);
  const auto u = uniform_marginal(4);
  const auto plan = sinkhorn({random_cost(rng, 4, 4)}, u, u, {.epsilon = 1e-6, .max_iters = 50});
  EXPECT_TRUE(plan.values.all_finite());
  EXPECT_LT(row_violation(plan.values, u), 1e-12);
}

TEST(Sinkhorn, PlanNonnegativeAndViolationNonIncreasing) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = tot::testing::random_dim(rng, 2, 8), m = tot::testing::random_dim(rng, 2, 8);
    const auto a = uniform_marginal(n), b = uniform_marginal(m);
    const double eps = std::uniform_real_distribution<double>(0.02, 1.0)(rng);
    const auto plan = sinkhorn({random_cost(rng, n, m)}, a, b, {.epsilon = eps, .max_iters = 60});
    for (double v : plan.values.data()) EXPECT_GE(v, 0.0);
    for (std::size_t k = 1; k < plan.violation_history.size(); ++k) {
      EXPECT_LE(plan.violation_history[k], plan.violation_history[k - 1] + 1e-15) << "trial " << trial << " iter " << k;
    }
  }
}

TEST(Sinkhorn, EpsilonConsistencyTowardsExactOptimum) {
  std::mt19937_64 rng(8);
  const auto u = uniform_marginal(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor c = random_cost(rng, 6, 6);
    const double optimum = exact_ot(c, u, u).cost;
    double previous = std::numeric_limits<double>::infinity();
    for (double eps : {1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001}) {
      const auto plan = sinkhorn({c}, u, u, converged(eps));
      ASSERT_TRUE(plan.converged) << "eps " << eps;
      const double cost = transport_cost(c, plan.values);
      EXPECT_LE(cost, previous + 1e-9) << "eps " << eps;
      previous = cost;
    }
    EXPECT_LT(previous, optimum * 1.01);
    EXPECT_GE(previous, optimum - 1e-8);
  }
}

TEST(Sinkhorn, EntropyGrowsWithEpsilon) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor c = random_cost(rng, 5, 4);
    const auto a = uniform_marginal(5), b = uniform_marginal(4);
    double previous = -std::numeric_limits<double>::infinity();
    for (double eps : {0.01, 0.1, 1.0}) {
      const double h = entropy(sinkhorn({c}, a, b, converged(eps)).values);
      EXPECT_GT(h, previous);
      previous = h;
    }
  }
}

TEST(Sinkhorn, TapeUnrollMatchesPlainSolver) {
  std::mt19937_64 rng(10);
  for (auto last : {Normalization::Row, Normalization::Column}) {
    const Tensor c = random_cost(rng, 4, 6);
    const auto a = uniform_marginal(4), b = uniform_marginal(6);
    const SinkhornConfig cfg{.epsilon = 0.1, .max_iters = 3, .last = last};
    Tape tape;
    EXPECT_EQ(sinkhorn(tape.constant(c), a, b, cfg).value(), sinkhorn({c}, a, b, cfg).values);
  }
}

TEST(Sinkhorn, TransportCostGradientThroughUnrolledIterations) {
  std::mt19937_64 rng(11);
  const auto a = uniform_marginal(4), b = uniform_marginal(3);
  for (int iters : {1, 3, 10}) {
    const Tensor c = random_cost(rng, 4, 3);
    auto f = [&](Tape&, Var cv) {
      Var p = sinkhorn(cv, a, b, {.epsilon = 0.1, .max_iters = iters});
      return tot::numkit::sum(tot::numkit::mul(cv, p));
    };
    EXPECT_LT(tot::numkit::grad_check(f, c).max_error, 1e-3) << iters << " iterations";
  }
}

TEST(Sinkhorn, CallCounterAdvances) {
  const auto before = sinkhorn_call_count();
  const auto u = uniform_marginal(2);
  sinkhorn({Tensor::zeros(2, 2)}, u, u, {});
  Tape tape;
  sinkhorn(tape.constant(Tensor::zeros(2, 2)), u, u, {});
  EXPECT_EQ(sinkhorn_call_count(), before + 2);
}
