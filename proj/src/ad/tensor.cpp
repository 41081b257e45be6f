#include "bexrl/ad/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "bexrl/util/error.hpp"

namespace bexrl::ad {

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) fail(ErrorKind::kShape, "zero-sized dimension in shape " + shape_str(shape_));
  }
  values_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_numel(shape_) != values_.size()) {
    fail(ErrorKind::kShape, "shape " + shape_str(shape_) + " does not hold " +
                                std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::vector(std::span<const double> values) {
  return Tensor({values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) return 1;
  return values_.size() / shape_.back();
}

double Tensor::item() const {
  if (values_.size() != 1) fail(ErrorKind::kShape, "item() on tensor of shape " + shape_str(shape_));
  return values_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != values_.size()) {
    fail(ErrorKind::kShape, "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), values_);
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace bexrl::ad
