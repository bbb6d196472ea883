#pragma once

// PNG (via libpng's simplified API) and binary PGM/PPM reading and writing.
// PNG input is converted to 8-bit gray or RGB by libpng: palettes are
// expanded, 16-bit samples are converted and alpha is composited on black.

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ntc/bytes.hpp"
#include "ntc/error.hpp"
#include "ntc/image.hpp"

namespace ntc {

inline bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

inline Image decode_png(std::span<const std::uint8_t> bytes) {
  detail::require<CorruptionError>(is_png(bytes), "png: bad signature");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
    throw CorruptionError(std::string("png: ") + png.message);
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image img(png.width, png.height, color ? 3 : 1);
  if (!png_image_finish_read(&png, nullptr, img.data.data(), 0, nullptr)) {
    const std::string message = png.message;
    png_image_free(&png);
    throw CorruptionError("png: " + message);
  }
  return img;
}

inline std::vector<std::uint8_t> encode_png(const Image& img) {
  detail::require<ParameterError>(img.channels == 1 || img.channels == 3, "png: image must be gray or RGB");
  detail::require<ParameterError>(img.width > 0 && img.height > 0, "png: empty image");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, img.data.data(), 0, nullptr))
    throw Error(std::string("png: ") + png.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, img.data.data(), 0, nullptr))
    throw Error(std::string("png: ") + png.message);
  out.resize(size);
  return out;
}

namespace detail {

/// Next whitespace-delimited header token, skipping '#' comments.
inline std::size_t pnm_number(ByteReader& r) {
  auto next = [&] { return static_cast<char>(r.u8()); };
  char c = next();
  for (;;) {
    if (c == '#') {
      while (c != '\n') c = next();
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      c = next();
    } else {
      break;
    }
  }
  std::size_t v = 0;
  std::size_t digits = 0;
  while (std::isdigit(static_cast<unsigned char>(c))) {
    require<CorruptionError>(++digits <= 9, "pnm: header value too large");
    v = v * 10 + static_cast<std::size_t>(c - '0');
    c = next();
  }
  require<CorruptionError>(digits > 0, "pnm: malformed header");
  require<CorruptionError>(std::isspace(static_cast<unsigned char>(c)), "pnm: malformed header");
  return v;
}

}  // namespace detail

inline bool is_pnm(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6');
}

/// Binary P5 (gray) or P6 (RGB) with maxval 255.
inline Image decode_pnm(std::span<const std::uint8_t> bytes) {
  detail::require<CorruptionError>(is_pnm(bytes), "pnm: expected binary P5 or P6");
  ByteReader r(bytes, "pnm");
  r.tag(2);
  const std::size_t channels = bytes[1] == '6' ? 3 : 1;
  const std::size_t width = detail::pnm_number(r);
  const std::size_t height = detail::pnm_number(r);
  const std::size_t maxval = detail::pnm_number(r);
  detail::require<CorruptionError>(width > 0 && height > 0, "pnm: zero dimension");
  detail::require<CorruptionError>(maxval == 255, "pnm: only 8-bit (maxval 255) files are supported");
  detail::require<CorruptionError>(r.remaining() / channels / width >= height, "pnm: truncated pixel data");
  Image img(width, height, channels);
  const auto px = r.raw(img.data.size());
  std::copy(px.begin(), px.end(), img.data.begin());
  return img;
}

inline std::vector<std::uint8_t> encode_pnm(const Image& img) {
  detail::require<ParameterError>(img.channels == 1 || img.channels == 3, "pnm: image must be gray or RGB");
  const std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width) +
                             " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data.begin(), img.data.end());
  return out;
}

/// Format chosen by content (PNG signature or P5/P6 magic).
inline Image decode_image(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_pnm(bytes)) return decode_pnm(bytes);
  throw CorruptionError("image: unrecognized format (expected PNG, PGM or PPM)");
}

inline Image read_image(const std::string& path) {
  try {
    return decode_image(read_file(path));
  } catch (const CorruptionError& e) {
    throw CorruptionError(path + ": " + e.what());
  }
}

/// Format chosen by extension: .pgm/.ppm/.pnm write PNM, anything else PNG.
inline void write_image(const std::string& path, const Image& img) {
  std::string ext;
  if (const auto dot = path.find_last_of('.'); dot != std::string::npos) ext = path.substr(dot + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == "pgm" || ext == "ppm" || ext == "pnm") {
    detail::require<ParameterError>(ext != "pgm" || img.channels == 1, "write_image: .pgm needs a gray image");
    detail::require<ParameterError>(ext != "ppm" || img.channels == 3, "write_image: .ppm needs an RGB image");
    write_file(path, encode_pnm(img));
  } else {
    write_file(path, encode_png(img));
  }
}

}  // namespace ntc
