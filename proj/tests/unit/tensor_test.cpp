#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "salnet/tensor.hpp"

namespace salnet {
namespace {

TEST(Tensor, SizeIsProductOfExtents) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.dim(2), 4u);
  for (float v : t.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor(Shape{}), ShapeError);
  EXPECT_THROW(Tensor(Shape{1, 2, 3, 4, 5}), ShapeError);
  EXPECT_THROW(Tensor(Shape{3, 0}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
}

TEST(Tensor, RowMajorAccess) {
  Tensor t({2, 2, 3}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  EXPECT_EQ(t.at(1, 0, 2), 8.0f);
  EXPECT_EQ(t.at(0, 1, 0), 3.0f);
  Tensor m = t.reshaped({4, 3});
  EXPECT_EQ(m.at(3, 1), 10.0f);
  EXPECT_THROW(t.reshaped({5}), ShapeError);
}

TEST(Tensor, Reductions) {
  Tensor t({4}, {-1.0f, 2.0f, 3.0f, 0.0f});
  EXPECT_EQ(max_value(t), 3.0f);
  EXPECT_EQ(min_value(t), -1.0f);
  EXPECT_DOUBLE_EQ(sum_value(t), 4.0);
  EXPECT_DOUBLE_EQ(mean_value(t), 1.0);
  Tensor c = clamp_nonnegative(t);
  EXPECT_EQ(c, Tensor({4}, {0.0f, 2.0f, 3.0f, 0.0f}));
  EXPECT_EQ(max_abs_difference(t, c), 1.0f);
}

TEST(Tensor, FinitenessCheck) {
  Tensor t({2}, {1.0f, 2.0f});
  EXPECT_TRUE(all_finite(t));
  t[1] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_FALSE(all_finite(t));
  t[1] = std::numeric_limits<float>::infinity();
  EXPECT_FALSE(all_finite(t));
}

TEST(Tensor, ShapeMismatchIsReported) {
  Tensor a({2, 3}), b({3, 2});
  EXPECT_THROW(require_same_shape(a, b, "test"), ShapeError);
  EXPECT_THROW(max_abs_difference(a, b), ShapeError);
  EXPECT_EQ(to_string(Shape{2, 3}), "[2x3]");
}

}  // namespace
}  // namespace salnet
