#pragma once

// Primitive layers of the transforms: affine convolution, regular down- and
// upsampling, GDN and its one-step approximate inverse (IGDN). Every layer has
// a forward and an exact reverse-mode backward.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ntc/error.hpp"
#include "ntc/tensor.hpp"

namespace ntc {

enum class PaddingMode : std::uint8_t { mirror = 0, zero = 1 };

/// Affine convolution kernel: weights laid out [out][in][kh][kw].
template <std::floating_point T>
struct BasicConvKernel {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_height = 0;
  std::size_t kernel_width = 0;
  std::vector<T> weights;
  std::vector<T> bias;

  BasicConvKernel() = default;
  BasicConvKernel(std::size_t out, std::size_t in, std::size_t kh, std::size_t kw)
      : out_channels(out),
        in_channels(in),
        kernel_height(kh),
        kernel_width(kw),
        weights(out * in * kh * kw, T(0)),
        bias(out, T(0)) {}

  std::size_t slice_size() const { return kernel_height * kernel_width; }
  std::size_t index(std::size_t o, std::size_t i, std::size_t a, std::size_t b) const {
    return ((o * in_channels + i) * kernel_height + a) * kernel_width + b;
  }
  T& at(std::size_t o, std::size_t i, std::size_t a, std::size_t b) {
    return weights[index(o, i, a, b)];
  }
  const T& at(std::size_t o, std::size_t i, std::size_t a, std::size_t b) const {
    return weights[index(o, i, a, b)];
  }

  void validate() const {
    detail::require<ParameterError>(
        weights.size() == out_channels * in_channels * kernel_height * kernel_width,
        "conv kernel: weight count does not match dimensions");
    detail::require<ParameterError>(bias.size() == out_channels,
                                    "conv kernel: bias length != out_channels");
    detail::require<ParameterError>(kernel_height % 2 == 1 && kernel_width % 2 == 1,
                                    "conv kernel: support must be odd (centered)");
  }
};

using ConvKernel = BasicConvKernel<double>;

/// GDN/IGDN parameters. gamma is symmetric and stored as its packed upper
/// triangle; gamma(i, j) reads mirror across the diagonal.
template <std::floating_point T>
class BasicGdnParams {
 public:
  BasicGdnParams() = default;
  explicit BasicGdnParams(std::size_t channels)
      : channels_(channels),
        beta_(channels, T(1)),
        gamma_(channels * (channels + 1) / 2, T(0)) {}

  /// From a full matrix (row-major, channels x channels). Must be symmetric.
  BasicGdnParams(std::vector<T> beta, const std::vector<T>& gamma_full)
      : channels_(beta.size()), beta_(std::move(beta)) {
    const std::size_t c = channels_;
    detail::require<ParameterError>(gamma_full.size() == c * c,
                                    "gdn params: gamma must be channels x channels");
    gamma_.resize(c * (c + 1) / 2);
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = i; j < c; ++j) {
        detail::require<ParameterError>(gamma_full[i * c + j] == gamma_full[j * c + i],
                                        "gdn params: gamma must be symmetric");
        gamma_[packed_index(i, j)] = gamma_full[i * c + j];
      }
    }
  }

  std::size_t channels() const { return channels_; }
  std::vector<T>& beta() { return beta_; }
  const std::vector<T>& beta() const { return beta_; }
  std::vector<T>& packed_gamma() { return gamma_; }
  const std::vector<T>& packed_gamma() const { return gamma_; }

  T gamma(std::size_t i, std::size_t j) const { return gamma_[packed_index(i, j)]; }
  void set_gamma(std::size_t i, std::size_t j, T v) { gamma_[packed_index(i, j)] = v; }

  std::size_t packed_index(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    // Row i of the upper triangle starts after i rows of decreasing length.
    return i * channels_ - i * (i - 1) / 2 + (j - i);
  }

 private:
  std::size_t channels_ = 0;
  std::vector<T> beta_;
  std::vector<T> gamma_;
};

using GdnParams = BasicGdnParams<double>;

template <std::floating_point T>
struct BasicConvGrads {
  BasicTensor<T> input;
  BasicConvKernel<T> kernel;
};

template <std::floating_point T>
struct BasicGdnGrads {
  BasicTensor<T> input;
  std::vector<T> beta;
  std::vector<T> gamma;  // packed upper triangle, symmetric parameterization
};

using ConvGrads = BasicConvGrads<double>;
using GdnGrads = BasicGdnGrads<double>;

namespace detail {

inline std::ptrdiff_t fold_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  // Symmetric extension: ... b a | a b c | c b ...
  const std::ptrdiff_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

/// For each output coordinate along one axis: the kernel taps that land on a
/// real (non-inserted-zero, in-bounds) input sample, in CSR layout.
struct AxisPlan {
  std::vector<std::size_t> offsets;  // size n_out + 1
  std::vector<std::size_t> taps;
  std::vector<std::size_t> sources;
  std::size_t n_out = 0;

  AxisPlan(std::size_t n_in, std::size_t kernel, std::size_t up, std::size_t down,
           PaddingMode padding) {
    const auto virtual_size = static_cast<std::ptrdiff_t>(n_in * up);
    n_out = n_in * up / down;
    const auto radius = static_cast<std::ptrdiff_t>(kernel / 2);
    offsets.reserve(n_out + 1);
    offsets.push_back(0);
    for (std::size_t o = 0; o < n_out; ++o) {
      const auto p = static_cast<std::ptrdiff_t>(o * down);
      for (std::size_t a = 0; a < kernel; ++a) {
        // True convolution: tap a weighs sample p - (a - radius).
        std::ptrdiff_t vi = p + radius - static_cast<std::ptrdiff_t>(a);
        if (vi < 0 || vi >= virtual_size) {
          if (padding == PaddingMode::zero) continue;
          vi = fold_index(vi, virtual_size);
        }
        if (vi % static_cast<std::ptrdiff_t>(up) != 0) continue;
        taps.push_back(a);
        sources.push_back(static_cast<std::size_t>(vi) / up);
      }
      offsets.push_back(taps.size());
    }
  }
};

template <std::floating_point T>
void check_resampled_conv(const BasicTensor<T>& input, const BasicConvKernel<T>& kernel,
                          std::size_t up, std::size_t down) {
  kernel.validate();
  require<ParameterError>(input.channels() == kernel.in_channels,
                          "conv2d: input has " + std::to_string(input.channels()) +
                              " channels, kernel expects " +
                              std::to_string(kernel.in_channels));
  require<ParameterError>(up >= 1 && down >= 1, "conv2d: factors must be >= 1");
  require<ParameterError>((input.height() * up) % down == 0 &&
                              (input.width() * up) % down == 0,
                          "conv2d: dimensions not divisible by downsampling factor");
  require<ParameterError>(input.height() > 0 && input.width() > 0, "conv2d: empty input");
}

/// Convolution of the (virtually) upsampled input, sampled at every
/// `down`-th position. up = down = 1 is the plain same-size convolution.
template <std::floating_point T>
BasicTensor<T> resampled_conv(const BasicTensor<T>& input, const BasicConvKernel<T>& kernel,
                              PaddingMode padding, std::size_t up, std::size_t down) {
  check_resampled_conv(input, kernel, up, down);
  const AxisPlan rows(input.height(), kernel.kernel_height, up, down, padding);
  const AxisPlan cols(input.width(), kernel.kernel_width, up, down, padding);
  BasicTensor<T> out(kernel.out_channels, rows.n_out, cols.n_out);
  const std::size_t in_w = input.width();

  for (std::size_t o = 0; o < kernel.out_channels; ++o) {
    auto dst = out.channel(o);
    std::fill(dst.begin(), dst.end(), kernel.bias[o]);
    for (std::size_t i = 0; i < kernel.in_channels; ++i) {
      const auto src = input.channel(i);
      const T* w = &kernel.weights[kernel.index(o, i, 0, 0)];
      for (std::size_t oy = 0; oy < rows.n_out; ++oy) {
        T* drow = &dst[oy * cols.n_out];
        for (std::size_t r = rows.offsets[oy]; r < rows.offsets[oy + 1]; ++r) {
          const T* srow = &src[rows.sources[r] * in_w];
          const T* wrow = w + rows.taps[r] * kernel.kernel_width;
          for (std::size_t ox = 0; ox < cols.n_out; ++ox) {
            T acc = 0;
            for (std::size_t c = cols.offsets[ox]; c < cols.offsets[ox + 1]; ++c)
              acc += wrow[cols.taps[c]] * srow[cols.sources[c]];
            drow[ox] += acc;
          }
        }
      }
    }
  }
  return out;
}

template <std::floating_point T>
BasicConvGrads<T> resampled_conv_backward(const BasicTensor<T>& input,
                                          const BasicConvKernel<T>& kernel,
                                          const BasicTensor<T>& grad_out, PaddingMode padding,
                                          std::size_t up, std::size_t down) {
  check_resampled_conv(input, kernel, up, down);
  const AxisPlan rows(input.height(), kernel.kernel_height, up, down, padding);
  const AxisPlan cols(input.width(), kernel.kernel_width, up, down, padding);
  require<ParameterError>(grad_out.shape() == Shape{kernel.out_channels, rows.n_out, cols.n_out},
                          "conv2d_backward: grad_out shape " + to_string(grad_out.shape()) +
                              " does not match forward output");

  BasicConvGrads<T> g{BasicTensor<T>(input.shape()),
                      BasicConvKernel<T>(kernel.out_channels, kernel.in_channels,
                                         kernel.kernel_height, kernel.kernel_width)};
  const std::size_t in_w = input.width();

  for (std::size_t o = 0; o < kernel.out_channels; ++o) {
    const auto go = grad_out.channel(o);
    T bias_sum = 0;
    for (T v : go) bias_sum += v;
    g.kernel.bias[o] = bias_sum;
    for (std::size_t i = 0; i < kernel.in_channels; ++i) {
      const auto src = input.channel(i);
      auto gin = g.input.channel(i);
      const T* w = &kernel.weights[kernel.index(o, i, 0, 0)];
      T* gw = &g.kernel.weights[kernel.index(o, i, 0, 0)];
      for (std::size_t oy = 0; oy < rows.n_out; ++oy) {
        const T* grow = &go[oy * cols.n_out];
        for (std::size_t r = rows.offsets[oy]; r < rows.offsets[oy + 1]; ++r) {
          const std::size_t src_off = rows.sources[r] * in_w;
          const T* srow = &src[src_off];
          T* girow = &gin[src_off];
          const std::size_t wrow_off = rows.taps[r] * kernel.kernel_width;
          for (std::size_t ox = 0; ox < cols.n_out; ++ox) {
            const T gv = grow[ox];
            if (gv == T(0)) continue;
            for (std::size_t c = cols.offsets[ox]; c < cols.offsets[ox + 1]; ++c) {
              const std::size_t b = wrow_off + cols.taps[c];
              const std::size_t s = cols.sources[c];
              gw[b] += gv * srow[s];
              girow[s] += gv * w[b];
            }
          }
        }
      }
    }
  }
  return g;
}

}  // namespace detail

/// Same-size affine convolution: out_i = sum_j h_ij * u_j + c_i.
template <std::floating_point T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicConvKernel<T>& kernel,
                      PaddingMode padding = PaddingMode::mirror) {
  return detail::resampled_conv(input, kernel, padding, 1, 1);
}

template <std::floating_point T>
BasicConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicConvKernel<T>& kernel,
                                  const BasicTensor<T>& grad_out,
                                  PaddingMode padding = PaddingMode::mirror) {
  return detail::resampled_conv_backward(input, kernel, grad_out, padding, 1, 1);
}

/// downsample(conv2d(input), factor), evaluating only the retained samples.
template <std::floating_point T>
BasicTensor<T> conv2d_downsample(const BasicTensor<T>& input, const BasicConvKernel<T>& kernel,
                                 std::size_t factor, PaddingMode padding = PaddingMode::mirror) {
  return detail::resampled_conv(input, kernel, padding, 1, factor);
}

template <std::floating_point T>
BasicConvGrads<T> conv2d_downsample_backward(const BasicTensor<T>& input,
                                             const BasicConvKernel<T>& kernel,
                                             const BasicTensor<T>& grad_out, std::size_t factor,
                                             PaddingMode padding = PaddingMode::mirror) {
  return detail::resampled_conv_backward(input, kernel, grad_out, padding, 1, factor);
}

/// conv2d(upsample(input, factor)), skipping the inserted zeros.
template <std::floating_point T>
BasicTensor<T> upsample_conv2d(const BasicTensor<T>& input, const BasicConvKernel<T>& kernel,
                               std::size_t factor, PaddingMode padding = PaddingMode::mirror) {
  return detail::resampled_conv(input, kernel, padding, factor, 1);
}

template <std::floating_point T>
BasicConvGrads<T> upsample_conv2d_backward(const BasicTensor<T>& input,
                                           const BasicConvKernel<T>& kernel,
                                           const BasicTensor<T>& grad_out, std::size_t factor,
                                           PaddingMode padding = PaddingMode::mirror) {
  return detail::resampled_conv_backward(input, kernel, grad_out, padding, factor, 1);
}

/// Keeps samples at (factor*m, factor*n).
template <std::floating_point T>
BasicTensor<T> downsample(const BasicTensor<T>& input, std::size_t factor) {
  detail::require<ParameterError>(factor >= 1, "downsample: factor must be >= 1");
  detail::require<ParameterError>(input.height() % factor == 0 && input.width() % factor == 0,
                                  "downsample: dimensions " + to_string(input.shape()) +
                                      " not divisible by " + std::to_string(factor));
  BasicTensor<T> out(input.channels(), input.height() / factor, input.width() / factor);
  for (std::size_t c = 0; c < out.channels(); ++c)
    for (std::size_t y = 0; y < out.height(); ++y)
      for (std::size_t x = 0; x < out.width(); ++x)
        out(c, y, x) = input(c, y * factor, x * factor);
  return out;
}

/// Zero insertion: input samples land on multiples of factor.
template <std::floating_point T>
BasicTensor<T> upsample(const BasicTensor<T>& input, std::size_t factor) {
  detail::require<ParameterError>(factor >= 1, "upsample: factor must be >= 1");
  BasicTensor<T> out(input.channels(), input.height() * factor, input.width() * factor);
  for (std::size_t c = 0; c < input.channels(); ++c)
    for (std::size_t y = 0; y < input.height(); ++y)
      for (std::size_t x = 0; x < input.width(); ++x)
        out(c, y * factor, x * factor) = input(c, y, x);
  return out;
}

namespace detail {

/// Per-pixel denominators beta_i + sum_j gamma_ij v_j^2, channel-major.
template <std::floating_point T>
std::vector<T> gdn_denominators(const BasicTensor<T>& v, const BasicGdnParams<T>& p) {
  require<ParameterError>(v.channels() == p.channels(),
                          "gdn: tensor has " + std::to_string(v.channels()) +
                              " channels, parameters " + std::to_string(p.channels()));
  const std::size_t c = v.channels();
  const std::size_t n = v.shape().plane();
  std::vector<T> sq(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) sq[k] = v.values()[k] * v.values()[k];
  std::vector<T> den(v.size());
  for (std::size_t i = 0; i < c; ++i) {
    T* d = &den[i * n];
    std::fill(d, d + n, p.beta()[i]);
    for (std::size_t j = 0; j < c; ++j) {
      const T g = p.gamma(i, j);
      if (g == T(0)) continue;
      const T* s = &sq[j * n];
      for (std::size_t k = 0; k < n; ++k) d[k] += g * s[k];
    }
  }
  for (T d : den)
    require<NumericError>(d > T(0) && std::isfinite(d), "gdn: non-positive denominator");
  return den;
}

template <std::floating_point T>
void check_grad_shape(const BasicTensor<T>& x, const BasicTensor<T>& grad_out, const char* op) {
  require<ParameterError>(x.shape() == grad_out.shape(),
                          std::string(op) + ": grad_out shape " + to_string(grad_out.shape()) +
                              " != input shape " + to_string(x.shape()));
}

}  // namespace detail

/// u_i = w_i / sqrt(beta_i + sum_j gamma_ij w_j^2), per spatial location.
template <std::floating_point T>
BasicTensor<T> gdn_forward(const BasicTensor<T>& w, const BasicGdnParams<T>& p) {
  const auto den = detail::gdn_denominators(w, p);
  BasicTensor<T> u(w.shape());
  for (std::size_t k = 0; k < w.size(); ++k) u.values()[k] = w.values()[k] / std::sqrt(den[k]);
  return u;
}

template <std::floating_point T>
BasicGdnGrads<T> gdn_backward(const BasicTensor<T>& w, const BasicGdnParams<T>& p,
                              const BasicTensor<T>& grad_out) {
  detail::check_grad_shape(w, grad_out, "gdn_backward");
  const auto den = detail::gdn_denominators(w, p);
  const std::size_t c = w.channels();
  const std::size_t n = w.shape().plane();
  const auto wv = w.values();
  const auto gv = grad_out.values();

  // t_i = g_i w_i d_i^{-3/2}
  std::vector<T> t(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) t[k] = gv[k] * wv[k] / (den[k] * std::sqrt(den[k]));

  BasicGdnGrads<T> g{BasicTensor<T>(w.shape()), std::vector<T>(c, T(0)),
                     std::vector<T>(p.packed_gamma().size(), T(0))};
  auto gw = g.input.values();
  for (std::size_t k = 0; k < w.size(); ++k) gw[k] = gv[k] / std::sqrt(den[k]);

  std::vector<T> full(c * c, T(0));
  for (std::size_t i = 0; i < c; ++i) {
    const T* ti = &t[i * n];
    T sum = 0;
    for (std::size_t k = 0; k < n; ++k) sum += ti[k];
    g.beta[i] = -T(0.5) * sum;
    for (std::size_t j = 0; j < c; ++j) {
      const T* wj = &wv[j * n];
      T s = 0;
      for (std::size_t k = 0; k < n; ++k) s += ti[k] * wj[k] * wj[k];
      full[i * c + j] = -T(0.5) * s;
      const T gij = p.gamma(i, j);
      if (gij == T(0)) continue;
      // d/dw_j of the i-th denominator term.
      T* gwj = &gw[j * n];
      for (std::size_t k = 0; k < n; ++k) gwj[k] -= gij * ti[k] * wj[k];
    }
  }
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = i; j < c; ++j)
      g.gamma[p.packed_index(i, j)] = i == j ? full[i * c + i] : full[i * c + j] + full[j * c + i];
  return g;
}

/// w_i = u_i * sqrt(beta_i + sum_j gamma_ij u_j^2), per spatial location.
template <std::floating_point T>
BasicTensor<T> igdn_forward(const BasicTensor<T>& u, const BasicGdnParams<T>& p) {
  const auto den = detail::gdn_denominators(u, p);
  BasicTensor<T> w(u.shape());
  for (std::size_t k = 0; k < u.size(); ++k) w.values()[k] = u.values()[k] * std::sqrt(den[k]);
  return w;
}

template <std::floating_point T>
BasicGdnGrads<T> igdn_backward(const BasicTensor<T>& u, const BasicGdnParams<T>& p,
                               const BasicTensor<T>& grad_out) {
  detail::check_grad_shape(u, grad_out, "igdn_backward");
  const auto den = detail::gdn_denominators(u, p);
  const std::size_t c = u.channels();
  const std::size_t n = u.shape().plane();
  const auto uv = u.values();
  const auto gv = grad_out.values();

  // s_i = g_i u_i / sqrt(d_i)
  std::vector<T> s(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) s[k] = gv[k] * uv[k] / std::sqrt(den[k]);

  BasicGdnGrads<T> g{BasicTensor<T>(u.shape()), std::vector<T>(c, T(0)),
                     std::vector<T>(p.packed_gamma().size(), T(0))};
  auto gu = g.input.values();
  for (std::size_t k = 0; k < u.size(); ++k) gu[k] = gv[k] * std::sqrt(den[k]);

  std::vector<T> full(c * c, T(0));
  for (std::size_t i = 0; i < c; ++i) {
    const T* si = &s[i * n];
    T sum = 0;
    for (std::size_t k = 0; k < n; ++k) sum += si[k];
    g.beta[i] = T(0.5) * sum;
    for (std::size_t j = 0; j < c; ++j) {
      const T* uj = &uv[j * n];
      T acc = 0;
      for (std::size_t k = 0; k < n; ++k) acc += si[k] * uj[k] * uj[k];
      full[i * c + j] = T(0.5) * acc;
      const T gij = p.gamma(i, j);
      if (gij == T(0)) continue;
      T* guj = &gu[j * n];
      for (std::size_t k = 0; k < n; ++k) guj[k] += gij * si[k] * uj[k];
    }
  }
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = i; j < c; ++j)
      g.gamma[p.packed_index(i, j)] = i == j ? full[i * c + i] : full[i * c + j] + full[j * c + i];
  return g;
}

}  // namespace ntc
