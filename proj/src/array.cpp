#include "sil/array.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sil/error.hpp"

namespace sil {

std::size_t shape_size(const Array::Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Array::Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Array::Array(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ContractViolation("array: shape " + shape_string(shape_) + " does not match " +
                            std::to_string(data_.size()) + " values");
  }
}

Array Array::scalar(double v) { return Array(Shape{}, {v}); }

Array Array::filled(Shape shape, double v) {
  Array a(std::move(shape));
  a.fill(v);
  return a;
}

Array Array::row_vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Array(Shape{1, n}, std::move(values));
}

std::size_t Array::rows() const noexcept {
  if (shape_.size() < 2) return 1;
  return shape_[0];
}

std::size_t Array::cols() const noexcept {
  if (shape_.empty()) return 1;
  if (shape_.size() == 1) return shape_[0];
  return shape_[1];
}

bool Array::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Array::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

Array Array::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ContractViolation("reshape: cannot view " + shape_string(shape_) + " as " + shape_string(shape));
  }
  return Array(std::move(shape), data_);
}

}  // namespace sil
