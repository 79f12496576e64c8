// Vector backends against the scalar reference, and the scalar reference
// against a triple-loop oracle.

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "support/random.hpp"
#include "tot/errors.hpp"
#include "tot/numkit/kernels.hpp"
#include "tot/numkit/ops.hpp"

namespace k = tot::numkit::kernels;
using tot::numkit::Tensor;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

std::vector<const k::KernelTable*> vector_backends() {
  std::vector<const k::KernelTable*> out;
  for (auto b : {k::Backend::Avx2, k::Backend::Neon}) {
    if (auto* t = k::table_for(b)) out.push_back(t);
  }
  return out;
}

}  // namespace

TEST(Kernels, ScalarAlwaysAvailable) {
  EXPECT_TRUE(k::cpu_supports(k::Backend::Scalar));
  EXPECT_EQ(k::table_for(k::Backend::Scalar), &k::scalar_table());
}

TEST(Kernels, ParseAndName) {
  for (auto b : {k::Backend::Scalar, k::Backend::Avx2, k::Backend::Neon}) EXPECT_EQ(k::parse_backend(k::name(b)), b);
  EXPECT_FALSE(k::parse_backend("sse9"));
}

TEST(Kernels, UnavailableBackendRejected) {
  for (auto b : {k::Backend::Avx2, k::Backend::Neon}) {
    if (!k::cpu_supports(b)) {
      EXPECT_THROW(k::set_backend(b), tot::ConfigError);
    }
  }
}

TEST(Kernels, VectorBackendsMatchScalarReference) {
  const auto& ref = k::scalar_table();
  std::mt19937_64 rng(11);
  for (const auto* t : vector_backends()) {
    SCOPED_TRACE(std::string(k::name(t->backend)));
    // Sizes straddle every tail length of 2-, 4- and 8-wide loops.
    for (std::size_t n = 0; n <= 37; ++n) {
      auto x = random_vec(rng, n), y = random_vec(rng, n);
      EXPECT_LT(rel(ref.dot(x.data(), y.data(), n), t->dot(x.data(), y.data(), n)), 1e-13);
      EXPECT_LT(rel(ref.sqdist(x.data(), y.data(), n), t->sqdist(x.data(), y.data(), n)), 1e-13);
      auto y1 = y, y2 = y;
      ref.axpy(0.37, x.data(), y1.data(), n);
      t->axpy(0.37, x.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) EXPECT_LT(rel(y1[i], y2[i]), 1e-14);
    }
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t m = tot::testing::random_dim(rng, 1, 13), n = tot::testing::random_dim(rng, 1, 13),
                        kk = tot::testing::random_dim(rng, 1, 13);
      auto a = random_vec(rng, m * kk), b = random_vec(rng, kk * n), bt = random_vec(rng, n * kk),
           at = random_vec(rng, kk * m), c0 = random_vec(rng, m * n);
      auto check = [&](auto fn_ref, auto fn_vec, const std::vector<double>& lhs, const std::vector<double>& rhs) {
        auto c1 = c0, c2 = c0;
        fn_ref(m, n, kk, lhs.data(), rhs.data(), c1.data());
        fn_vec(m, n, kk, lhs.data(), rhs.data(), c2.data());
        for (std::size_t i = 0; i < c1.size(); ++i) EXPECT_LT(rel(c1[i], c2[i]), 1e-13);
      };
      check(ref.gemm_nn, t->gemm_nn, a, b);
      check(ref.gemm_nt, t->gemm_nt, a, bt);
      check(ref.gemm_tn, t->gemm_tn, at, b);
    }
  }
}

TEST(Kernels, GemmVariantsAgreeWithTripleLoop) {
  std::mt19937_64 rng(5);
  for (auto* t : {&k::scalar_table()}) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t m = tot::testing::random_dim(rng, 1, 9), n = tot::testing::random_dim(rng, 1, 9),
                        kk = tot::testing::random_dim(rng, 1, 9);
      Tensor a = tot::testing::random_tensor(rng, m, kk), b = tot::testing::random_tensor(rng, kk, n);
      Tensor expect = tot::testing::naive_matmul(a, b);

      Tensor c = Tensor::zeros(m, n);
      t->gemm_nn(m, n, kk, a.data().data(), b.data().data(), c.data().data());
      Tensor bt = b.transposed(), at = a.transposed();
      Tensor c_nt = Tensor::zeros(m, n), c_tn = Tensor::zeros(m, n);
      t->gemm_nt(m, n, kk, a.data().data(), bt.data().data(), c_nt.data().data());
      t->gemm_tn(m, n, kk, at.data().data(), b.data().data(), c_tn.data().data());
      for (std::size_t i = 0; i < expect.size(); ++i) {
        EXPECT_NEAR(c[i], expect[i], 1e-12);
        EXPECT_NEAR(c_nt[i], expect[i], 1e-12);
        EXPECT_NEAR(c_tn[i], expect[i], 1e-12);
      }
    }
  }
}

TEST(Kernels, MatmulIdenticalUnderEachBackendWithinTolerance) {
  std::mt19937_64 rng(9);
  Tensor a = tot::testing::random_tensor(rng, 17, 23), b = tot::testing::random_tensor(rng, 23, 11);
  const auto original = k::active_backend();
  k::set_backend(k::Backend::Scalar);
  Tensor ref = tot::numkit::matmul(a, b);
  for (const auto* t : vector_backends()) {
    k::set_backend(t->backend);
    Tensor got = tot::numkit::matmul(a, b);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_LT(rel(ref[i], got[i]), 1e-13);
  }
  k::set_backend(original);
}
