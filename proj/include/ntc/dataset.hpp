#pragma once

// Turning raw 8-bit images into training patches: saturation filter,
// dequantization noise, random area-averaging downsampling and cropping.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ntc/error.hpp"
#include "ntc/image.hpp"
#include "ntc/random.hpp"
#include "ntc/tensor.hpp"

namespace ntc {

struct PreprocessConfig {
  std::size_t patch_size = 64;
  std::size_t channels = 1;           // 1: RGB inputs are converted to luma
  double max_factor = 0.75;           // resampling factors must stay below this
  double min_factor = 0.25;
  double saturation_threshold = 0.1;  // max fraction of samples at 0 or 255
  std::uint64_t seed = 0;

  void validate() const {
    detail::require<ConfigError>(patch_size > 0 && patch_size % 16 == 0,
                                 "preprocess: patch size must be a positive multiple of 16");
    detail::require<ConfigError>(channels == 1 || channels == 3, "preprocess: channels must be 1 or 3");
    detail::require<ConfigError>(min_factor > 0 && min_factor <= max_factor && max_factor <= 1,
                                 "preprocess: need 0 < min_factor <= max_factor <= 1");
    detail::require<ConfigError>(saturation_threshold >= 0 && saturation_threshold <= 1,
                                 "preprocess: saturation threshold must be in [0, 1]");
  }
};

struct PreprocessResult {
  std::vector<Tensor> patches;  // normalized to [0, 1]
  std::vector<std::string> log;
};

/// Fraction of samples equal to 0 or 255.
inline double saturated_fraction(const Image& img) {
  if (img.data.empty()) return 0;
  std::size_t n = 0;
  for (auto v : img.data) n += v == 0 || v == 255;
  return static_cast<double>(n) / static_cast<double>(img.data.size());
}

inline Image to_luma(const Image& img) {
  if (img.channels == 1) return img;
  Image out(img.width, img.height, 1);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double l = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(l + 0.5), 0.0, 255.0));
    }
  return out;
}

namespace detail {

/// Row-stochastic weights of box-filter resampling from n to m samples.
inline std::vector<std::vector<std::pair<std::size_t, double>>> area_weights(std::size_t n,
                                                                             std::size_t m) {
  std::vector<std::vector<std::pair<std::size_t, double>>> w(m);
  const double ratio = static_cast<double>(n) / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double a = static_cast<double>(j) * ratio;
    const double b = static_cast<double>(j + 1) * ratio;
    for (auto i = static_cast<std::size_t>(std::floor(a)); i < n && static_cast<double>(i) < b; ++i) {
      const double overlap = std::min(b, static_cast<double>(i + 1)) - std::max(a, static_cast<double>(i));
      if (overlap > 0) w[j].emplace_back(i, overlap / ratio);
    }
  }
  return w;
}

}  // namespace detail

/// Area-averaging resize of every channel to out_height x out_width.
inline Tensor area_resize(const Tensor& t, std::size_t out_height, std::size_t out_width) {
  detail::require<ParameterError>(out_height > 0 && out_width > 0, "area_resize: empty output");
  const auto wy = detail::area_weights(t.height(), out_height);
  const auto wx = detail::area_weights(t.width(), out_width);
  Tensor rows(t.channels(), t.height(), out_width);
  for (std::size_t c = 0; c < t.channels(); ++c)
    for (std::size_t y = 0; y < t.height(); ++y)
      for (std::size_t j = 0; j < out_width; ++j) {
        double s = 0;
        for (auto [i, w] : wx[j]) s += w * t(c, y, i);
        rows(c, y, j) = s;
      }
  Tensor out(t.channels(), out_height, out_width);
  for (std::size_t c = 0; c < t.channels(); ++c)
    for (std::size_t j = 0; j < out_height; ++j)
      for (auto [i, w] : wy[j])
        for (std::size_t x = 0; x < out_width; ++x) out(c, j, x) += w * rows(c, i, x);
  return out;
}

/// One patch per accepted image; deterministic under config.seed.
inline PreprocessResult preprocess_dataset(std::span<const Image> images, const PreprocessConfig& config) {
  config.validate();
  PreprocessResult r;
  Rng rng(config.seed);
  const std::size_t p = config.patch_size;
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image img = config.channels == 1 ? to_luma(images[n]) : images[n];
    const std::string id = "image " + std::to_string(n);
    detail::require<ParameterError>(img.channels == config.channels,
                                    "preprocess: " + id + " is not RGB");
    const double saturated = saturated_fraction(img);
    if (saturated > config.saturation_threshold) {
      r.log.push_back(id + ": rejected, saturated fraction " + std::to_string(saturated));
      continue;
    }
    const double lo = std::max(config.min_factor, static_cast<double>(p) /
                                                      static_cast<double>(std::min(img.width, img.height)));
    if (lo > config.max_factor) {
      r.log.push_back(id + ": discarded, too small (" + std::to_string(img.width) + "x" +
                      std::to_string(img.height) + ")");
      continue;
    }
    Tensor t = to_tensor_8bit(img);
    for (double& v : t.values()) v += rng.uniform() - 0.5;
    const double f = rng.uniform(lo, config.max_factor);
    const auto h = std::max(p, static_cast<std::size_t>(std::floor(static_cast<double>(img.height) * f)));
    const auto w = std::max(p, static_cast<std::size_t>(std::floor(static_cast<double>(img.width) * f)));
    const Tensor small = area_resize(t, h, w);
    const std::size_t oy = rng.below(h - p + 1);
    const std::size_t ox = rng.below(w - p + 1);
    Tensor patch(config.channels, p, p);
    for (std::size_t c = 0; c < config.channels; ++c)
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t x = 0; x < p; ++x) patch(c, y, x) = small(c, oy + y, ox + x) * kPixelScale;
    r.patches.push_back(std::move(patch));
  }
  return r;
}

}  // namespace ntc
