#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace salnet {

/// Raised when operands disagree on extents or rank.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Dense row-major float tensor of rank 1..4. Images and feature maps are
/// stored channels-first (C x H x W).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  float* raw() { return data_.data(); }
  const float* raw() const { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // Rank-2 and rank-3 element access; no bounds checks.
  float& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  float& at(std::size_t ch, std::size_t r, std::size_t c) {
    return data_[(ch * shape_[1] + r) * shape_[2] + c];
  }
  float at(std::size_t ch, std::size_t r, std::size_t c) const {
    return data_[(ch * shape_[1] + r) * shape_[2] + c];
  }

  /// Same data, different extents; element counts must agree.
  Tensor reshaped(Shape shape) const;

  void fill(float value);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Throws ShapeError with `what` as context unless a and b have equal shapes.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

float max_value(const Tensor& t);
float min_value(const Tensor& t);
double mean_value(const Tensor& t);
double sum_value(const Tensor& t);
float max_abs_difference(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);

/// Elementwise max(x, 0).
Tensor clamp_nonnegative(const Tensor& t);

}  // namespace salnet
