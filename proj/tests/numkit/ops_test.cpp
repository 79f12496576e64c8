#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/random.hpp"
#include "tot/errors.hpp"
#include "tot/numkit/ops.hpp"

using namespace tot::numkit;

TEST(Matmul, IdentityCase) {
  Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(matmul(Tensor::identity(2), m), m);
}

TEST(Matmul, RowTimesColumn) { EXPECT_EQ(matmul(Tensor::row({1, 2}), Tensor::matrix({{3}, {4}}))[0], 11.0); }

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros(2, 3), Tensor::zeros(2, 3));
    FAIL() << "expected DimensionError";
  } catch (const tot::DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("vs [2x3]"), std::string::npos);
  }
}

TEST(Matmul, AgreesWithTripleLoopUpTo32) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = tot::testing::random_dim(rng, 1, 32), n = tot::testing::random_dim(rng, 1, 32),
                      k = tot::testing::random_dim(rng, 1, 32);
    Tensor a = tot::testing::random_tensor(rng, m, k), b = tot::testing::random_tensor(rng, k, n);
    Tensor got = matmul(a, b), expect = tot::testing::naive_matmul(a, b);
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_LE(std::abs(got[i] - expect[i]), 1e-12 * std::max(1.0, std::abs(expect[i])));
    }
  }
}

TEST(Matmul, RandomThreeByFourTimesFourByTwo) {
  std::mt19937_64 rng(1);
  Tensor a = tot::testing::random_tensor(rng, 3, 4), b = tot::testing::random_tensor(rng, 4, 2);
  Tensor got = matmul(a, b), expect = tot::testing::naive_matmul(a, b);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expect[i], 1e-14);
  EXPECT_EQ(matmul_nt(a, b.transposed()).shape(), (Shape{3, 2}));
  EXPECT_EQ(matmul_tn(a.transposed(), b).shape(), (Shape{3, 2}));
}

TEST(Softmax, ZeroRowIsUniform) {
  Tensor y = softmax_rows(Tensor::zeros(1, 4));
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, LogThreeCase) {
  Tensor y = softmax_rows(Tensor::row({0.0, std::log(3.0)}));
  EXPECT_NEAR(y[0], 0.25, 1e-15);
  EXPECT_NEAR(y[1], 0.75, 1e-15);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = tot::testing::random_dim(rng, 1, 8), n = tot::testing::random_dim(rng, 1, 8);
    Tensor x = tot::testing::random_tensor(rng, m, n, -30, 30);
    Tensor shifted = x;
    std::uniform_real_distribution<double> shift(-100, 100);
    for (std::size_t r = 0; r < m; ++r) {
      const double s = trial == 0 ? 100.0 : shift(rng);
      for (double& v : shifted.row_span(r)) v += s;
    }
    Tensor y = softmax_rows(x), ys = softmax_rows(shifted);
    for (std::size_t r = 0; r < m; ++r) {
      double total = 0.0;
      std::size_t arg = 0, arg_s = 0;
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_GE(y(r, j), 0.0);
        total += y(r, j);
        if (y(r, j) > y(r, arg)) arg = j;
        if (ys(r, j) > ys(r, arg_s)) arg_s = j;
        EXPECT_NEAR(y(r, j), ys(r, j), 1e-12);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
      EXPECT_EQ(arg, arg_s);
    }
  }
}

TEST(Softmax, ExactlyShiftInvariantForRepresentableShift) {
  // Row + 100 subtracts to the same centred values, so outputs match bitwise.
  Tensor x = Tensor::row({0.5, -1.25, 2.0, 0.0});
  Tensor s = Tensor::row({100.5, 98.75, 102.0, 100.0});
  EXPECT_EQ(softmax_rows(x), softmax_rows(s));
}

TEST(TapeOps, ValuesMatchPlainCounterparts) {
  std::mt19937_64 rng(2);
  Tape tape;
  Tensor a = tot::testing::random_tensor(rng, 3, 5), b = tot::testing::random_tensor(rng, 5, 4);
  Var va = tape.constant(a), vb = tape.constant(b);
  EXPECT_EQ(matmul(va, vb).value(), matmul(a, b));
  EXPECT_EQ(softmax_rows(va).value(), softmax_rows(a));
  Var cat = concat_rows({va, slice_rows(va, 1, 2)});
  EXPECT_EQ(cat.rows(), 5u);
  EXPECT_EQ(slice_cols(va, 2, 3).value()(1, 0), a(1, 2));
  EXPECT_NEAR(lse_rows(va).value()[0], log_sum_exp(a.row_span(0)), 0.0);
}

TEST(TapeOps, NonFiniteResultThrows) {
  Tape tape;
  Var x = tape.leaf(Tensor::row({0.0}));
  EXPECT_THROW(log(x), tot::NumericError);
}

TEST(TapeOps, StrictShapesNoBroadcast) {
  Tape tape;
  Var a = tape.leaf(Tensor::zeros(2, 3));
  Var r = tape.leaf(Tensor::zeros(1, 2));
  EXPECT_THROW(add(a, r), tot::DimensionError);
  EXPECT_THROW(add_row(a, r), tot::DimensionError);
  EXPECT_THROW(add_col(a, tape.leaf(Tensor::zeros(3, 1))), tot::DimensionError);
}

TEST(Tape, UnusedParametersGetZeroGradient) {
  ParamStore store;
  store.add("used", Tensor::row({1.0, 2.0}));
  store.add("unused", Tensor::row({3.0}));
  Tape tape;
  Var u = tape.param(store, "used");
  Var loss = sum(mul(u, u));
  tape.backward(loss);
  Gradients g = store.zero_grads();
  tape.accumulate_param_grads(g);
  EXPECT_EQ(g[0], Tensor::row({2.0, 4.0}));
  EXPECT_EQ(g[1], Tensor::row({0.0}));
}

TEST(Tape, ReusedParameterAccumulates) {
  ParamStore store;
  store.add("w", Tensor::row({3.0}));
  Tape tape;
  Var a = tape.param(store, "w");
  Var b = tape.param(store, "w");
  EXPECT_EQ(a.id(), b.id());
  Var loss = sum(add(mul(a, b), scale(a, 2.0)));  // w^2 + 2w
  tape.backward(loss);
  Gradients g = store.zero_grads();
  tape.accumulate_param_grads(g);
  EXPECT_DOUBLE_EQ(g[0][0], 8.0);
}

TEST(Tape, BackwardNeedsScalar) {
  Tape tape;
  Var x = tape.leaf(Tensor::zeros(2, 2));
  EXPECT_THROW(tape.backward(x), tot::DimensionError);
}
