#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace golfsig::nn {

using Shape = std::vector<std::size_t>;

// Storage is over-aligned so vectorised reductions see the same alignment on
// every allocation; otherwise summation order (and the last bit) can vary.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using Storage = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
class NDArray {
 public:
  NDArray() = default;
  explicit NDArray(Shape shape, double fill = 0.0);
  NDArray(Shape shape, std::vector<double> values);

  static NDArray matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return NDArray({rows, cols}, fill);
  }
  static NDArray scalar(double v) { return NDArray({1}, std::vector<double>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  bool empty() const { return values_.empty(); }

  /// Leading extent (product of all axes but the last) and the last extent.
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  Storage& storage() { return values_; }
  const Storage& storage() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return std::span<double>(values_).subspan(r * cols(), cols()); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * cols(), cols());
  }

  NDArray reshaped(Shape shape) const;
  void fill(double v);
  bool all_finite() const;
  double sum() const;

  friend bool operator==(const NDArray& a, const NDArray& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  Storage values_;
};

/// Throws DimensionError naming `what` and `axis` unless a.shape()[axis] == expected.
void expect_dim(const NDArray& a, std::size_t axis, std::size_t expected, const std::string& what);

}  // namespace golfsig::nn
