#pragma once

// PSNR on gray, luma or chroma planes and 5-scale MS-SSIM on luma.
//
// Color conversion uses the JPEG (full-range BT.601) Y'CbCr matrix without
// rounding. MS-SSIM follows Wang, Simoncelli and Bovik (2003): 11-tap
// Gaussian window with sigma 1.5, K1 = 0.01, K2 = 0.03, L = 255, weights
// {0.0448, 0.2856, 0.3001, 0.2363, 0.1333}, valid-mode filtering and 2x2
// average downsampling between scales.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "ntc/error.hpp"
#include "ntc/image.hpp"

namespace ntc {

enum class Plane { gray, luma, chroma };

/// One plane of doubles, row-major.
struct PlaneImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> data;

  double at(std::size_t x, std::size_t y) const { return data[y * width + x]; }
};

inline PlaneImage extract_plane(const Image& img, int which) {
  PlaneImage p{img.width, img.height, std::vector<double>(img.pixel_count())};
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      double v;
      if (img.channels == 1) {
        v = img.at(x, y);
      } else {
        const double r = img.at(x, y, 0), g = img.at(x, y, 1), b = img.at(x, y, 2);
        if (which == 0)
          v = 0.299 * r + 0.587 * g + 0.114 * b;
        else if (which == 1)
          v = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
        else
          v = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
      }
      p.data[y * img.width + x] = v;
    }
  return p;
}

/// Y' for RGB images, the image itself for grayscale.
inline PlaneImage luma_plane(const Image& img) { return extract_plane(img, 0); }

namespace detail {

inline void require_same_dims(const Image& a, const Image& b, const char* who) {
  require<ParameterError>(a.width == b.width && a.height == b.height && a.channels == b.channels,
                          std::string(who) + ": images differ in size or channel count");
  require<ParameterError>(a.pixel_count() > 0, std::string(who) + ": empty image");
}

inline double plane_mse(const PlaneImage& a, const PlaneImage& b) {
  double sq = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double e = a.data[i] - b.data[i];
    sq += e * e;
  }
  return sq / static_cast<double>(a.data.size());
}

}  // namespace detail

/// Mean squared error in 8-bit units on the selected plane(s). "gray" on an
/// RGB image averages over the three color channels.
inline double plane_mse(const Image& ref, const Image& test, Plane plane) {
  detail::require_same_dims(ref, test, "psnr");
  switch (plane) {
    case Plane::luma:
      return detail::plane_mse(extract_plane(ref, 0), extract_plane(test, 0));
    case Plane::chroma:
      detail::require<ParameterError>(ref.channels == 3, "psnr: chroma needs RGB images");
      return 0.5 * (detail::plane_mse(extract_plane(ref, 1), extract_plane(test, 1)) +
                    detail::plane_mse(extract_plane(ref, 2), extract_plane(test, 2)));
    case Plane::gray:
      break;
  }
  double sq = 0;
  for (std::size_t i = 0; i < ref.data.size(); ++i) {
    const double e = static_cast<double>(ref.data[i]) - static_cast<double>(test.data[i]);
    sq += e * e;
  }
  return sq / static_cast<double>(ref.data.size());
}

inline double psnr_from_mse(double mse) {
  if (mse <= 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

/// 10 log10(255^2 / MSE); +infinity for identical planes.
inline double psnr(const Image& ref, const Image& test, Plane plane = Plane::gray) {
  return psnr_from_mse(plane_mse(ref, test, plane));
}

struct MsSsimConfig {
  std::vector<double> weights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};  // one per scale
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 255.0;

  std::size_t scales() const { return weights.size(); }
  /// Smallest side length that keeps a full window at the coarsest scale.
  std::size_t min_side() const { return window << (scales() - 1); }
};

namespace detail {

inline std::vector<double> gaussian_taps(std::size_t n, double sigma) {
  std::vector<double> g(n);
  double sum = 0;
  const double c = 0.5 * static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-d * d / (2 * sigma * sigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

/// Separable valid-mode filtering.
inline PlaneImage filter_valid(const PlaneImage& p, const std::vector<double>& taps) {
  const std::size_t n = taps.size();
  const std::size_t w = p.width - n + 1, h = p.height - n + 1;
  PlaneImage rows{w, p.height, std::vector<double>(w * p.height)};
  for (std::size_t y = 0; y < p.height; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0;
      for (std::size_t k = 0; k < n; ++k) s += taps[k] * p.at(x + k, y);
      rows.data[y * w + x] = s;
    }
  PlaneImage out{w, h, std::vector<double>(w * h)};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0;
      for (std::size_t k = 0; k < n; ++k) s += taps[k] * rows.at(x, y + k);
      out.data[y * w + x] = s;
    }
  return out;
}

inline PlaneImage product(const PlaneImage& a, const PlaneImage& b) {
  PlaneImage out{a.width, a.height, std::vector<double>(a.data.size())};
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  return out;
}

/// 2x2 box average; an odd trailing row or column is dropped.
inline PlaneImage downsample2(const PlaneImage& p) {
  PlaneImage out{p.width / 2, p.height / 2, {}};
  out.data.resize(out.width * out.height);
  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x)
      out.data[y * out.width + x] = 0.25 * (p.at(2 * x, 2 * y) + p.at(2 * x + 1, 2 * y) +
                                            p.at(2 * x, 2 * y + 1) + p.at(2 * x + 1, 2 * y + 1));
  return out;
}

struct SsimTerms {
  double luminance = 0;
  double contrast_structure = 0;
};

inline SsimTerms ssim_terms(const PlaneImage& a, const PlaneImage& b, const MsSsimConfig& cfg) {
  const auto g = gaussian_taps(cfg.window, cfg.sigma);
  const double c1 = (cfg.k1 * cfg.peak) * (cfg.k1 * cfg.peak);
  const double c2 = (cfg.k2 * cfg.peak) * (cfg.k2 * cfg.peak);
  const auto mu_a = filter_valid(a, g), mu_b = filter_valid(b, g);
  const auto aa = filter_valid(product(a, a), g), bb = filter_valid(product(b, b), g);
  const auto ab = filter_valid(product(a, b), g);
  SsimTerms t;
  for (std::size_t i = 0; i < mu_a.data.size(); ++i) {
    const double ma = mu_a.data[i], mb = mu_b.data[i];
    const double va = aa.data[i] - ma * ma, vb = bb.data[i] - mb * mb, cov = ab.data[i] - ma * mb;
    t.luminance += (2 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    t.contrast_structure += (2 * cov + c2) / (va + vb + c2);
  }
  const double n = static_cast<double>(mu_a.data.size());
  t.luminance /= n;
  t.contrast_structure /= n;
  return t;
}

}  // namespace detail

/// MS-SSIM of the luma planes. Negative per-scale terms are clamped to zero
/// before exponentiation.
inline double ms_ssim(const Image& ref, const Image& test, const MsSsimConfig& cfg = {}) {
  detail::require_same_dims(ref, test, "ms_ssim");
  detail::require<ConfigError>(cfg.scales() >= 1 && cfg.window >= 1 && cfg.sigma > 0,
                               "ms_ssim: invalid configuration");
  const std::size_t side = cfg.min_side();
  detail::require<ParameterError>(
      ref.width >= side && ref.height >= side,
      "ms_ssim: " + std::to_string(ref.width) + "x" + std::to_string(ref.height) + " is too small for " +
          std::to_string(cfg.scales()) + " scales (need at least " + std::to_string(side) +
          " pixels per side); use fewer scales via MsSsimConfig::weights");
  PlaneImage a = luma_plane(ref), b = luma_plane(test);
  double score = 1.0;
  for (std::size_t s = 0; s < cfg.scales(); ++s) {
    if (s > 0) {
      a = detail::downsample2(a);
      b = detail::downsample2(b);
    }
    const auto t = detail::ssim_terms(a, b, cfg);
    const double w = cfg.weights[s];
    score *= std::pow(std::max(t.contrast_structure, 0.0), w);
    if (s + 1 == cfg.scales()) score *= std::pow(std::max(t.luminance, 0.0), w);
  }
  return score;
}

}  // namespace ntc
