#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "ntc/error.hpp"
#include "ntc/tensor.hpp"

namespace ntc {

/// Rounds to the nearest integer, ties away from zero.
inline QuantizedCode quantize(const Tensor& y) {
  QuantizedCode q(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = y.values()[i];
    detail::require<NumericError>(std::isfinite(v), "quantize: non-finite code value");
    const double r = std::round(v);
    detail::require<NumericError>(r >= std::numeric_limits<std::int32_t>::min() &&
                                      r <= std::numeric_limits<std::int32_t>::max(),
                                  "quantize: code value out of range");
    q.values()[i] = static_cast<std::int32_t>(r);
  }
  return q;
}

/// The integers reinterpreted as real values.
inline Tensor dequantize(const QuantizedCode& q) {
  Tensor y(q.shape());
  for (std::size_t i = 0; i < q.size(); ++i) y.values()[i] = q.values()[i];
  return y;
}

}  // namespace ntc
