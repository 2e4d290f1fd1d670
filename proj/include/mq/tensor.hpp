#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "mq/errors.hpp"

namespace mq {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

// Dense row-major array of 64-bit floats. Every public constructor and
// every op that returns a Tensor guarantees the stored values are finite;
// a NaN or Inf raises NonFiniteError instead of propagating.
class Tensor {
 public:
  Tensor() = default;

  // Zero-filled tensor of the given shape.
  explicit Tensor(Shape shape);

  // Takes ownership of data; size must equal product(shape).
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& at(std::size_t i) { return data_[i]; }
  double at(std::size_t i) const { return data_[i]; }

  // 2-D accessors; only valid when rank() == 2.
  double& at2(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at2(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Scalar value of a rank-0/1-element tensor.
  double item() const;

  void fill(double v);

  // Throws NonFiniteError naming `context` if any value is NaN/Inf.
  void check_finite(const char* context) const;

  // A copy of the contiguous sub-block at index `i` along axis 0,
  // shaped like this tensor with the leading axis removed.
  Tensor index0(std::size_t i) const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

// 2-D transpose (pure data movement).
Tensor transpose2d(const Tensor& x);

}  // namespace mq
