#include <chrono>
#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace matcha;

TEST(Matrix, ZerosHasShapeAndZeroValues) {
  const Matrix z = zeros(2, 3);
  EXPECT_EQ(z.rows(), 2u);
  EXPECT_EQ(z.cols(), 3u);
  EXPECT_TRUE(z.row_major());
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(z.get(i, j), 0.0f);
  EXPECT_EQ(zeros(1, 1).get(0, 0), 0.0f);
  EXPECT_EQ(zeros(1000, 1000).storage_data().size(), 1000000u);
}

TEST(Matrix, ZeroDimensionIsRejected) {
  EXPECT_THROW(zeros(0, 3), DimensionError);
  EXPECT_THROW(zeros(3, 0), DimensionError);
  EXPECT_THROW(Matrix(2, 2, std::vector<float>(3)), DimensionError);
}

TEST(Matrix, FromArray) {
  const Matrix m = from_array({{1, 2}, {3, 4}});
  EXPECT_EQ(m.get(1, 0), 3.0f);
  const Matrix col = from_array({{0.25}, {-1.5}});
  EXPECT_EQ(col.rows(), 2u);
  EXPECT_EQ(col.cols(), 1u);
  EXPECT_THROW(from_array(std::vector<std::vector<double>>{{1, 2}, {3}}), ShapeError);
  EXPECT_THROW(from_array(std::vector<std::vector<double>>{}), DimensionError);
}

TEST(Matrix, RandomIsSeededAndInUnitInterval) {
  EXPECT_TRUE(support::bit_equal(random(2, 2, 42), random(2, 2, 42)));
  EXPECT_FALSE(support::bit_equal(random(4, 4, 1), random(4, 4, 2)));
  for (float v : random(30, 30).to_vector()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  EXPECT_EQ(random(1000, 100, 1).size(), 100000u);
}

TEST(Matrix, IndexErrorsOutOfRange) {
  Matrix m = zeros(2, 2);
  EXPECT_THROW(m.get(2, 0), IndexError);
  EXPECT_THROW(m.get(0, 2), IndexError);
  EXPECT_THROW(m.set(5, 5, 1.0f), IndexError);
}

TEST(Matrix, SetThenGetInBothLayouts) {
  for (bool flipped : {false, true}) {
    Matrix m = support::random_layout(5, 7, 3, flipped);
    ASSERT_EQ(m.row_major(), !flipped);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 7; ++j) {
        const float v = static_cast<float>(i * 10 + j) - 0.5f;
        m.set(i, j, v);
        EXPECT_EQ(m.get(i, j), v);
      }
  }
}

TEST(Matrix, IndexMapFollowsDirectionFlag) {
  const Matrix a = from_array({{1, 2, 3}, {4, 5, 6}});
  const auto raw = a.storage_data();
  EXPECT_EQ(raw[1 * 3 + 2], a.get(1, 2));
  const Matrix t = a.t();
  EXPECT_FALSE(t.row_major());
  const auto traw = t.storage_data();
  // column-major: (i,j) -> j*rows + i with rows = 3
  EXPECT_EQ(traw[1 * 3 + 2], t.get(2, 1));
}

TEST(Matrix, CopiesShareUntilWritten) {
  Matrix a = from_array({{1, 2}, {3, 4}});
  Matrix b = a;
  EXPECT_TRUE(a.shares_storage_with(b));
  b.set(0, 0, 9.0f);
  EXPECT_FALSE(a.shares_storage_with(b));
  EXPECT_EQ(a.get(0, 0), 1.0f);
  EXPECT_EQ(b.get(0, 0), 9.0f);
}

TEST(Matrix, ToVectorIsRowMajor) {
  const Matrix a = from_array({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(a.t().to_vector(), (std::vector<float>{1, 4, 2, 5, 3, 6}));
}

TEST(Transpose, SwapsIndicesAndSharesStorage) {
  const Matrix a = random(2, 3, 5);
  const Matrix t = transpose(a);
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t.cols(), 2u);
  EXPECT_TRUE(t.shares_storage_with(a));
  EXPECT_EQ(t.storage_id(), a.storage_id());
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(t.get(j, i), a.get(i, j));
  EXPECT_TRUE(support::bit_equal(transpose(transpose(a)), a));
  EXPECT_EQ(transpose(transpose(a)).row_major(), a.row_major());
}

TEST(Transpose, TimeIndependentOfSize) {
  const Matrix small = random(10, 10, 1), large = random(1000, 1000, 2);
  auto time = [](const Matrix& m) {
    constexpr int reps = 200000;
    std::size_t sink = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) sink += transpose(m).rows();
    const auto t1 = std::chrono::steady_clock::now();
    EXPECT_GT(sink, 0u);
    return std::chrono::duration<double>(t1 - t0).count();
  };
  // Best of a few rounds to keep scheduler noise out of the ratio.
  double s = 1e9, l = 1e9;
  for (int round = 0; round < 5; ++round) {
    s = std::min(s, time(small));
    l = std::min(l, time(large));
  }
  EXPECT_LE(l / s, 2.0) << "small " << s << " s, large " << l << " s";
}
