#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "ntc/error.hpp"

namespace ntc {

namespace detail {

/// cos(pi * m / (2 n)) using integer range reduction and a fixed polynomial,
/// so the result depends only on IEEE-754 arithmetic and not on libm.
inline double cos_half_pi_ratio(std::size_t m, std::size_t n) {
  const std::size_t period = 4 * n;
  std::size_t r = m % period;  // angle = r * (pi / 2n) in [0, 2pi)
  double sign = 1.0;
  if (r > 2 * n) r = period - r;  // cos(2pi - a) = cos(a)
  if (r > n) {                    // cos(pi - a) = -cos(a)
    r = 2 * n - r;
    sign = -1.0;
  }
  // Now a = r * pi / (2n) in [0, pi/2]; use sin(pi/2 - a) past pi/4.
  const bool use_sin = 2 * r > n;
  const std::size_t num = use_sin ? n - r : r;
  const double x = std::numbers::pi * static_cast<double>(num) / static_cast<double>(2 * n);
  const double x2 = x * x;
  double term = use_sin ? x : 1.0;
  double sum = term;
  for (int j = 1; j <= 12; ++j) {
    const double a = use_sin ? 2.0 * j : 2.0 * j - 1.0;
    term *= -x2 / (a * (a + 1.0));
    sum += term;
  }
  return sign * sum;
}

}  // namespace detail

/// Orthonormal type-II DCT matrix of size n (row k = frequency k).
class DctBasis {
 public:
  explicit DctBasis(std::size_t n) : n_(n), m_(n * n) {
    for (std::size_t k = 0; k < n; ++k) {
      const double alpha = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
      for (std::size_t i = 0; i < n; ++i)
        m_[k * n + i] = alpha * detail::cos_half_pi_ratio((2 * i + 1) * k, n);
    }
  }

  std::size_t size() const { return n_; }
  double operator()(std::size_t k, std::size_t i) const { return m_[k * n_ + i]; }

 private:
  std::size_t n_;
  std::vector<double> m_;
};

/// Separable 2-D DCT on one rows x cols slice. inverse = transpose map.
class Dct2d {
 public:
  Dct2d(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

  std::size_t rows() const { return rows_.size(); }
  std::size_t cols() const { return cols_.size(); }
  std::size_t slice_size() const { return rows() * cols(); }

  /// coefficients = C_r X C_c^T
  void forward(std::span<const double> spatial, std::span<double> coeffs) const {
    std::vector<double> tmp(slice_size());
    apply(spatial, coeffs, tmp, false);
  }
  /// spatial = C_r^T X C_c
  void inverse(std::span<const double> coeffs, std::span<double> spatial) const {
    std::vector<double> tmp(slice_size());
    apply(coeffs, spatial, tmp, true);
  }

  /// Applies the transform to every consecutive slice of a packed array.
  std::vector<double> forward_all(std::span<const double> slices) const {
    return map_all(slices, false);
  }
  std::vector<double> inverse_all(std::span<const double> slices) const {
    return map_all(slices, true);
  }

 private:
  void apply(std::span<const double> in, std::span<double> out, std::vector<double>& tmp,
             bool transpose) const {
    const std::size_t r = rows(), c = cols();
    detail::require<ParameterError>(in.size() == r * c && out.size() == r * c,
                                    "dct: slice size mismatch");
    auto basis_r = [&](std::size_t k, std::size_t i) {
      return transpose ? rows_(i, k) : rows_(k, i);
    };
    auto basis_c = [&](std::size_t k, std::size_t i) {
      return transpose ? cols_(i, k) : cols_(k, i);
    };
    // rows first, into tmp
    for (std::size_t k = 0; k < r; ++k)
      for (std::size_t x = 0; x < c; ++x) {
        double s = 0;
        for (std::size_t y = 0; y < r; ++y) s += basis_r(k, y) * in[y * c + x];
        tmp[k * c + x] = s;
      }
    for (std::size_t k = 0; k < r; ++k)
      for (std::size_t l = 0; l < c; ++l) {
        double s = 0;
        for (std::size_t x = 0; x < c; ++x) s += basis_c(l, x) * tmp[k * c + x];
        out[k * c + l] = s;
      }
  }

  std::vector<double> map_all(std::span<const double> slices, bool transpose) const {
    const std::size_t n = slice_size();
    detail::require<ParameterError>(slices.size() % n == 0, "dct: not a whole number of slices");
    std::vector<double> out(slices.size());
    std::vector<double> tmp(n);
    for (std::size_t off = 0; off < slices.size(); off += n)
      apply(slices.subspan(off, n), std::span<double>(out).subspan(off, n), tmp, transpose);
    return out;
  }

  DctBasis rows_;
  DctBasis cols_;
};

}  // namespace ntc
