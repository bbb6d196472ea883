#pragma once

// Image <-> NTCB compressed file.
//
//   "NTCB" u16 width u16 height u8 flags u16 lambda_index payload
//
// flags bit 0 is the color flag (1 = RGB); the other bits must be zero.
// The payload is the range-coded quantized code; see docs/bitstream.md.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ntc/bytes.hpp"
#include "ntc/container.hpp"
#include "ntc/entropy_code.hpp"
#include "ntc/error.hpp"
#include "ntc/image.hpp"
#include "ntc/metrics.hpp"
#include "ntc/quantize.hpp"
#include "ntc/transforms.hpp"

namespace ntc {

inline constexpr std::size_t kHeaderBytes = 11;

struct FileHeader {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  bool color = false;
  std::uint16_t lambda_index = 0;

  friend bool operator==(const FileHeader&, const FileHeader&) = default;
};

inline void write_header(ByteWriter& w, const FileHeader& h) {
  w.tag("NTCB");
  w.u16(h.width);
  w.u16(h.height);
  w.u8(h.color ? 1 : 0);
  w.u16(h.lambda_index);
}

inline FileHeader read_header(ByteReader& r) {
  detail::require<CorruptionError>(r.remaining() >= kHeaderBytes, "compressed file: truncated header");
  detail::require<CorruptionError>(r.tag(4) == "NTCB", "compressed file: bad magic (expected NTCB)");
  FileHeader h;
  h.width = r.u16();
  h.height = r.u16();
  const std::uint8_t flags = r.u8();
  detail::require<CorruptionError>((flags & ~1u) == 0, "compressed file: reserved flag bits set");
  h.color = flags & 1u;
  h.lambda_index = r.u16();
  detail::require<CorruptionError>(h.width > 0 && h.height > 0, "compressed file: zero image dimension");
  return h;
}

/// Smallest multiple of factor that is >= n.
inline std::size_t padded_size(std::size_t n, std::size_t factor) { return (n + factor - 1) / factor * factor; }

/// Symmetric extension (edge sample repeated), periodic beyond one mirror.
inline std::size_t mirror_index(std::size_t i, std::size_t n) {
  const std::size_t r = i % (2 * n);
  return r < n ? r : 2 * n - 1 - r;
}

/// Normalized tensor of the image, mirror-padded to multiples of `factor`.
inline Tensor padded_tensor(const Image& img, std::size_t factor, double scale, double offset) {
  const std::size_t h = padded_size(img.height, factor), w = padded_size(img.width, factor);
  Tensor t(img.channels, h, w);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        t(c, y, x) = img.at(mirror_index(x, img.width), mirror_index(y, img.height), c) * scale + offset;
  return t;
}

namespace detail {

inline void check_model_for(const ModelEntry& e, std::size_t channels) {
  require<ParameterError>(e.model.transform.spec.image_channels() == channels,
                          "codec: model expects " + std::to_string(e.model.transform.spec.image_channels()) +
                              "-channel images, got " + std::to_string(channels));
}

}  // namespace detail

/// Rounded analysis output of the padded, normalized image.
inline QuantizedCode analyze_and_quantize(const Image& img, const ModelEntry& e) {
  const auto& tp = e.model.transform;
  const Tensor x = padded_tensor(img, tp.spec.total_factor(), e.model.pixel_scale, e.model.pixel_offset);
  return quantize(analysis_forward(x, tp.analysis, tp.spec.padding, false).y);
}

/// Synthesis of the dequantized code, back to 8 bits and cropped.
inline Image synthesize(const QuantizedCode& q, const ModelEntry& e, std::size_t width, std::size_t height) {
  const auto& tp = e.model.transform;
  const Tensor x_hat = synthesis_forward(dequantize(q), tp.synthesis, tp.spec.padding, false).x_hat;
  detail::require<NumericError>(x_hat.all_finite(), "decompress: non-finite reconstruction");
  return from_tensor(x_hat, width, height, e.model.pixel_scale, e.model.pixel_offset);
}

inline std::vector<std::uint8_t> compress(const Image& img, std::uint16_t lambda_index,
                                          const ModelRegistry& registry) {
  detail::require<ParameterError>(img.channels == 1 || img.channels == 3,
                                  "compress: image must be grayscale or RGB");
  detail::require<ParameterError>(img.width > 0 && img.height > 0, "compress: empty image");
  detail::require<ParameterError>(img.width <= 65535 && img.height <= 65535,
                                  "compress: image dimensions exceed 65535");
  const ModelEntry& e = registry.at(lambda_index);
  detail::check_model_for(e, img.channels);
  const QuantizedCode q = analyze_and_quantize(img, e);
  ByteWriter w;
  write_header(w, {static_cast<std::uint16_t>(img.width), static_cast<std::uint16_t>(img.height),
                   img.channels == 3, lambda_index});
  w.raw(encode_code(q, e.pmfs, CodingMode::adaptive));
  return w.take();
}

inline FileHeader peek_header(std::span<const std::uint8_t> file) {
  ByteReader r(file, "compressed file");
  return read_header(r);
}

/// Decoded code and header; CorruptionError for anything undecodable,
/// including lambda indices the registry does not know.
inline std::pair<FileHeader, QuantizedCode> decode_file(std::span<const std::uint8_t> file,
                                                        const ModelRegistry& registry) {
  ByteReader r(file, "compressed file");
  const FileHeader h = read_header(r);
  detail::require<CorruptionError>(registry.contains(h.lambda_index),
                                   "compressed file: unknown lambda index " + std::to_string(h.lambda_index));
  const ModelEntry& e = registry.at(h.lambda_index);
  const auto& spec = e.model.transform.spec;
  detail::require<CorruptionError>(spec.image_channels() == (h.color ? 3u : 1u),
                                   "compressed file: color flag does not match the model");
  const std::size_t f = spec.total_factor();
  const Shape shape{spec.code_channels(), padded_size(h.height, f) / f, padded_size(h.width, f) / f};
  return {h, decode_code(r.raw(r.remaining()), shape, e.pmfs, CodingMode::adaptive)};
}

inline Image decompress(std::span<const std::uint8_t> file, const ModelRegistry& registry) {
  const auto [h, q] = decode_file(file, registry);
  return synthesize(q, registry.at(h.lambda_index), h.width, h.height);
}

struct RDCurvePoint {
  std::uint16_t lambda_index = 0;
  double lambda = 0;
  double bpp = 0;  // from total file size, header included
  double psnr = 0;
  double ms_ssim = std::numeric_limits<double>::quiet_NaN();  // NaN if any image is too small
  std::size_t images = 0;
};

/// Per lambda index: mean rate from actual file sizes, mean PSNR (gray, or
/// luma for RGB) and mean MS-SSIM.
inline std::vector<RDCurvePoint> rd_curve(std::span<const Image> images, const ModelRegistry& registry,
                                          std::span<const std::uint16_t> lambda_indices) {
  detail::require<ParameterError>(!images.empty(), "rd_curve: no images");
  std::vector<RDCurvePoint> out;
  for (std::uint16_t index : lambda_indices) {
    RDCurvePoint p;
    p.lambda_index = index;
    p.lambda = registry.at(index).model.lambda;
    p.images = images.size();
    double ssim_sum = 0;
    bool ssim_ok = true;
    for (const Image& img : images) {
      const auto file = compress(img, index, registry);
      const Image rec = decompress(file, registry);
      p.bpp += 8.0 * static_cast<double>(file.size()) / static_cast<double>(img.pixel_count());
      p.psnr += psnr(img, rec, img.channels == 3 ? Plane::luma : Plane::gray);
      const MsSsimConfig cfg;
      if (img.width >= cfg.min_side() && img.height >= cfg.min_side())
        ssim_sum += ms_ssim(img, rec, cfg);
      else
        ssim_ok = false;
    }
    const double n = static_cast<double>(images.size());
    p.bpp /= n;
    p.psnr /= n;
    if (ssim_ok) p.ms_ssim = ssim_sum / n;
    out.push_back(p);
  }
  return out;
}

}  // namespace ntc
