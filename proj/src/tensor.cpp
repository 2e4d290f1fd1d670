#include "mq/tensor.hpp"

#include <cmath>
#include <sstream>

namespace mq {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) {
    if (d == 0) throw ShapeError("zero-sized dimension in shape " + shape_str(s));
    if (n > SIZE_MAX / d) throw DimOverflowError("shape " + shape_str(s) + " overflows element count");
    n *= d;
  }
  return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_str(shape_) + " expects " +
                     std::to_string(shape_numel(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  }
  check_finite("Tensor");
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() requires a single-element tensor, got shape " + shape_str(shape_));
  }
  return data_[0];
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

void Tensor::check_finite(const char* context) const {
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw NonFiniteError(std::string(context) + ": non-finite value in tensor of shape " +
                           shape_str(shape_));
    }
  }
}

Tensor Tensor::index0(std::size_t i) const {
  if (shape_.empty()) throw ShapeError("index0 on rank-0 tensor");
  if (i >= shape_[0]) {
    throw ShapeError("index0: index " + std::to_string(i) + " out of range for shape " +
                     shape_str(shape_));
  }
  Shape sub(shape_.begin() + 1, shape_.end());
  if (sub.empty()) sub = {1};
  std::size_t block = shape_numel(sub);
  std::vector<double> out(data_.begin() + i * block, data_.begin() + (i + 1) * block);
  return Tensor(std::move(sub), std::move(out));
}

Tensor transpose2d(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("transpose2d expects rank 2, got shape " + shape_str(x.shape()));
  std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at2(j, i) = x.at2(i, j);
  return out;
}

}  // namespace mq
