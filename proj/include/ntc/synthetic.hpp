#pragma once

// "Dead leaves" test images: overlapping discs with power-law radii, smooth
// shading and antialiased edges, plus a little sensor-like noise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ntc/image.hpp"
#include "ntc/random.hpp"

namespace ntc {

struct DeadLeavesConfig {
  std::size_t leaves = 0;  // 0: chosen from the image area
  double min_radius = 2.0;
  double max_radius = 40.0;
  double noise_sigma = 1.5;
  double shading = 40.0;  // max gray-level change across a leaf
};

inline Image dead_leaves(std::size_t width, std::size_t height, std::size_t channels, Rng& rng,
                         const DeadLeavesConfig& cfg = {}) {
  std::vector<double> canvas(width * height * channels);
  std::vector<double> base(channels);
  for (auto& b : base) b = rng.uniform(30, 225);
  for (std::size_t i = 0; i < canvas.size(); ++i) canvas[i] = base[i % channels];

  const std::size_t leaves =
      cfg.leaves ? cfg.leaves : std::max<std::size_t>(16, width * height / 40);
  for (std::size_t n = 0; n < leaves; ++n) {
    // Radius density proportional to r^-3 on [min, max] (inverse CDF).
    const double a = 1.0 / (cfg.min_radius * cfg.min_radius);
    const double b = 1.0 / (cfg.max_radius * cfg.max_radius);
    const double r = 1.0 / std::sqrt(a - rng.uniform() * (a - b));
    const double cx = rng.uniform(-r, static_cast<double>(width) + r);
    const double cy = rng.uniform(-r, static_cast<double>(height) + r);
    std::vector<double> color(channels);
    for (auto& c : color) c = rng.uniform(20, 235);
    const double gx = rng.uniform(-1, 1) * cfg.shading / (2 * r);
    const double gy = rng.uniform(-1, 1) * cfg.shading / (2 * r);
    const auto x0 = static_cast<std::ptrdiff_t>(std::floor(cx - r - 1));
    const auto x1 = static_cast<std::ptrdiff_t>(std::ceil(cx + r + 1));
    const auto y0 = static_cast<std::ptrdiff_t>(std::floor(cy - r - 1));
    const auto y1 = static_cast<std::ptrdiff_t>(std::ceil(cy + r + 1));
    for (auto y = std::max<std::ptrdiff_t>(y0, 0); y < std::min<std::ptrdiff_t>(y1, height); ++y)
      for (auto x = std::max<std::ptrdiff_t>(x0, 0); x < std::min<std::ptrdiff_t>(x1, width); ++x) {
        const double dx = static_cast<double>(x) + 0.5 - cx;
        const double dy = static_cast<double>(y) + 0.5 - cy;
        const double alpha = std::clamp(r - std::sqrt(dx * dx + dy * dy) + 0.5, 0.0, 1.0);
        if (alpha <= 0) continue;
        for (std::size_t c = 0; c < channels; ++c) {
          double& v = canvas[(static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)) * channels + c];
          v = (1 - alpha) * v + alpha * (color[c] + gx * dx + gy * dy);
        }
      }
  }
  Image img(width, height, channels);
  for (std::size_t i = 0; i < canvas.size(); ++i) {
    const double v = canvas[i] + cfg.noise_sigma * rng.normal();
    img.data[i] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 1.0, 254.0));
  }
  return img;
}

inline std::vector<Image> dead_leaves_set(std::size_t count, std::size_t width, std::size_t height,
                                          std::size_t channels, std::uint64_t seed,
                                          const DeadLeavesConfig& cfg = {}) {
  Rng rng(seed);
  std::vector<Image> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(dead_leaves(width, height, channels, rng, cfg));
  return out;
}

}  // namespace ntc
