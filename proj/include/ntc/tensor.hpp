#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "ntc/error.hpp"

namespace ntc {

struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  constexpr std::size_t size() const { return channels * height * width; }
  constexpr std::size_t plane() const { return height * width; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

/// Dense channels x height x width array, channel-major then row-major.
template <typename T>
  requires std::is_arithmetic_v<T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0))
      : shape_(shape), data_(shape.size(), fill) {}
  BasicTensor(std::size_t c, std::size_t h, std::size_t w, T fill = T(0))
      : BasicTensor(Shape{c, h, w}, fill) {}
  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(shape), data_(std::move(data)) {
    detail::require<ParameterError>(data_.size() == shape_.size(),
                                    "tensor data length does not match shape " +
                                        to_string(shape_));
  }

  const Shape& shape() const { return shape_; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  const T& operator()(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }

  std::span<T> channel(std::size_t c) {
    return std::span<T>(data_).subspan(c * shape_.plane(), shape_.plane());
  }
  std::span<const T> channel(std::size_t c) const {
    return std::span<const T>(data_).subspan(c * shape_.plane(), shape_.plane());
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  bool all_finite() const {
    if constexpr (std::is_integral_v<T>) return true;
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

using Tensor = BasicTensor<double>;
/// Quantized code: integers, same layout as the continuous code.
using QuantizedCode = BasicTensor<std::int32_t>;

template <std::floating_point T>
T dot(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require<ParameterError>(a.shape() == b.shape(), "dot: shape mismatch");
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
  return s;
}

}  // namespace ntc
