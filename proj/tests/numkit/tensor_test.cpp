#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "support/random.hpp"
#include "tot/errors.hpp"
#include "tot/numkit/tensor.hpp"
#include "tot/numkit/tensor_io.hpp"

using namespace tot::numkit;

TEST(Tensor, ShapeAndDataLengthMustAgree) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), tot::DimensionError);
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
}

TEST(Tensor, RankOneIsARow) {
  Tensor v({4}, {1, 2, 3, 4});
  EXPECT_EQ(v.rows(), 1u);
  EXPECT_EQ(v.cols(), 4u);
  EXPECT_EQ(v.reshaped({1, 4}).shape(), (Shape{1, 4}));
  EXPECT_THROW(v.reshaped({3}), tot::DimensionError);
}

TEST(Tensor, TransposeAndFinite) {
  Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  Tensor t = m.transposed();
  EXPECT_EQ(t.shape(), (Shape{3, 2}));
  EXPECT_EQ(t(2, 1), 6.0);
  EXPECT_TRUE(m.all_finite());
  m(0, 0) = std::nan("");
  EXPECT_FALSE(m.all_finite());
}

TEST(TensorIo, LayoutIsLittleEndianRankDimsF32) {
  std::vector<std::uint8_t> bytes;
  append_tensor(bytes, Tensor({2}, {1.0, -2.0}));
  const std::vector<std::uint8_t> expect = {1, 0, 0, 0, 2, 0, 0, 0,          // rank 1, dim 2
                                            0, 0, 0x80, 0x3f, 0, 0, 0, 0xc0};  // 1.0f, -2.0f
  EXPECT_EQ(bytes, expect);
  EXPECT_EQ(encoded_size({2}), bytes.size());
}

TEST(TensorIo, RoundTripOfF32RepresentableValuesIsExact) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t r = tot::testing::random_dim(rng, 1, 6), c = tot::testing::random_dim(rng, 1, 6);
    Tensor t = round_to_f32(tot::testing::random_tensor(rng, r, c, -100, 100));
    std::stringstream ss;
    write_tensor(ss, t);
    EXPECT_EQ(read_tensor(ss), t);
  }
}

TEST(TensorIo, TruncatedBlobIsALoadError) {
  std::vector<std::uint8_t> bytes;
  append_tensor(bytes, Tensor::zeros(3, 3));
  bytes.resize(bytes.size() - 1);
  std::size_t off = 0;
  EXPECT_THROW(decode_tensor(bytes, off), tot::LoadError);
  std::vector<std::uint8_t> bad_rank = {0, 0, 0, 0};
  off = 0;
  EXPECT_THROW(decode_tensor(bad_rank, off), tot::LoadError);
}
