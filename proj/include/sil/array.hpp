#pragma once

#include <cstddef>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace sil {

/// Dense row-major array of doubles. Rank 0 (scalar), 1 or 2 in practice;
/// `rows()`/`cols()` view rank-1 data as a single row.
class Array {
 public:
  using Shape = std::vector<std::size_t>;

  Array() = default;
  explicit Array(Shape shape);
  Array(Shape shape, std::vector<double> data);

  static Array scalar(double v);
  static Array zeros(std::size_t rows, std::size_t cols) { return Array(Shape{rows, cols}); }
  static Array filled(Shape shape, double v);
  static Array row_vector(std::vector<double> values);
  static Array zeros_like(const Array& other) { return Array(other.shape()); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& at(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

  std::span<const double> row(std::size_t r) const noexcept {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }
  std::span<double> row(std::size_t r) noexcept {
    return std::span<double>(data_).subspan(r * cols(), cols());
  }

  bool all_finite() const noexcept;
  void fill(double v) noexcept;
  Array reshaped(Shape shape) const;

  bool operator==(const Array& other) const = default;

 private:
  Shape shape_{0};
  std::vector<double> data_;
};

std::string shape_string(const Array::Shape& shape);
std::size_t shape_size(const Array::Shape& shape);

/// Named trainable tensors. Ordered so iteration (and serialization) is stable.
using ParamMap = std::map<std::string, Array>;
using GradientMap = std::map<std::string, Array>;

}  // namespace sil
