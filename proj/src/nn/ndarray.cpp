#include "golfsig/nn/ndarray.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "golfsig/util/error.hpp"

namespace golfsig::nn {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

NDArray::NDArray(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

NDArray::NDArray(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(values.begin(), values.end()) {
  if (shape_size(shape_) != values_.size()) {
    throw DimensionError("NDArray: shape " + shape_string(shape_) + " holds " +
                         std::to_string(shape_size(shape_)) + " values, got " + std::to_string(values_.size()));
  }
}

std::size_t NDArray::rows() const {
  if (shape_.empty()) return 0;
  return shape_.size() == 1 ? 1 : values_.size() / shape_.back();
}

std::size_t NDArray::cols() const { return shape_.empty() ? 0 : shape_.back(); }

NDArray NDArray::reshaped(Shape shape) const {
  if (shape_size(shape) != values_.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(shape_) + " as " + shape_string(shape));
  }
  NDArray out;
  out.shape_ = std::move(shape);
  out.values_ = values_;
  return out;
}

void NDArray::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool NDArray::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double NDArray::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

void expect_dim(const NDArray& a, std::size_t axis, std::size_t expected, const std::string& what) {
  if (axis >= a.ndim() || a.dim(axis) != expected) {
    throw DimensionError(what + ": axis " + std::to_string(axis) + " expected extent " + std::to_string(expected) +
                         ", got shape " + shape_string(a.shape()));
  }
}

}  // namespace golfsig::nn
