#pragma once

// 8-bit images (interleaved samples) and their mapping to the transform
// domain: planar tensors with pixels scaled into [0, 1].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ntc/error.hpp"
#include "ntc/tensor.hpp"

namespace ntc {

inline constexpr double kPixelScale = 1.0 / 255.0;

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;  // 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), data(w * h * c, fill) {
    detail::require<ParameterError>(c == 1 || c == 3, "image: channel count must be 1 or 3");
  }

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c = 0) {
    return data[(y * width + x) * channels + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return data[(y * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return width * height; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Planar tensor in 8-bit units (no scaling).
inline Tensor to_tensor_8bit(const Image& img) {
  Tensor t(img.channels, img.height, img.width);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) t(c, y, x) = img.at(x, y, c);
  return t;
}

/// Planar tensor with pixel * scale + offset ([0, 1] by default).
inline Tensor to_tensor(const Image& img, double scale = kPixelScale, double offset = 0.0) {
  Tensor t = to_tensor_8bit(img);
  for (double& v : t.values()) v = v * scale + offset;
  return t;
}

/// Back to 8-bit units, clamped to [0, 255] and rounded with floor(v + 0.5).
inline std::uint8_t to_8bit(double normalized, double scale = kPixelScale, double offset = 0.0) {
  const double v = std::clamp((normalized - offset) / scale, 0.0, 255.0);
  return static_cast<std::uint8_t>(std::floor(v + 0.5));
}

/// Inverse of to_tensor for the top-left width x height window.
inline Image from_tensor(const Tensor& t, std::size_t width, std::size_t height,
                         double scale = kPixelScale, double offset = 0.0) {
  detail::require<ParameterError>(t.channels() == 1 || t.channels() == 3,
                                  "from_tensor: channel count must be 1 or 3");
  detail::require<ParameterError>(width <= t.width() && height <= t.height(),
                                  "from_tensor: crop larger than tensor");
  Image img(width, height, t.channels());
  for (std::size_t c = 0; c < t.channels(); ++c)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) img.at(x, y, c) = to_8bit(t(c, y, x), scale, offset);
  return img;
}

inline Image from_tensor(const Tensor& t) { return from_tensor(t, t.width(), t.height()); }

}  // namespace ntc
