#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "support/metrics_oracle.hpp"
#include "tot/errors.hpp"
#include "tot/metricsdata/metrics.hpp"

using namespace tot::metricsdata;
using Labels = std::vector<std::size_t>;

TEST(Metrics, PerfectPredictions) {
  const Labels y = {0, 1, 2, 1, 0};
  const Metrics m = compute_metrics(y, y, 3);
  EXPECT_EQ(m.acc, 1.0);
  EXPECT_EQ(m.macro_f1, 1.0);
  EXPECT_EQ(m.mmae, 0.0);
}

TEST(Metrics, OrdinalErrorExample) {
  const Metrics m = compute_metrics(Labels{1, 2}, Labels{0, 2}, 3);
  EXPECT_EQ(m.mmae, 0.5);
  EXPECT_EQ(m.acc, 0.5);
}

TEST(Metrics, HandConfusionExample) {
  const Metrics m = compute_metrics(Labels{0, 1, 1, 1}, Labels{0, 0, 1, 1}, 2);
  EXPECT_EQ(m.acc, 0.75);
  EXPECT_NEAR(m.macro_f1, (2.0 / 3.0 + 4.0 / 5.0) / 2.0, 1e-15);
  EXPECT_NEAR(m.macro_f1, 0.7333, 1e-4);
}

TEST(Metrics, MatchesConfusionOracle) {
  std::mt19937_64 rng(11);
  for (std::size_t c : {2u, 3u}) {
    std::uniform_int_distribution<std::size_t> cls(0, c - 1), len(1, 60);
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t n = len(rng);
      Labels p(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = cls(rng);
        y[i] = cls(rng);
      }
      const Metrics got = compute_metrics(p, y, c);
      const Metrics want = tot::testing::confusion_oracle(p, y, c);
      ASSERT_EQ(got.acc, want.acc);
      ASSERT_EQ(got.macro_f1, want.macro_f1);
      ASSERT_EQ(got.mmae, want.mmae);
    }
  }
}

TEST(Metrics, MmaeIgnoresClassAbsentFromLabels) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> cls(0, 2);
  for (int trial = 0; trial < 100; ++trial) {
    Labels p(20), y(20);
    for (std::size_t i = 0; i < 20; ++i) {
      p[i] = cls(rng);
      y[i] = cls(rng);
    }
    EXPECT_EQ(compute_metrics(p, y, 3).mmae, compute_metrics(p, y, 4).mmae);
  }
}

TEST(Metrics, RejectsBadInput) {
  EXPECT_THROW(compute_metrics(Labels{0, 1}, Labels{0}, 2), tot::InputError);
  EXPECT_THROW(compute_metrics(Labels{}, Labels{}, 2), tot::InputError);
  EXPECT_THROW(compute_metrics(Labels{2}, Labels{0}, 2), tot::InputError);
}
