#pragma once

// Order-0 exponential-Golomb code over any bit sink/source: n is written as
// the binary form of n + 1 preceded by one zero per bit after its leading one.

#include <bit>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ntc/error.hpp"

namespace ntc {

inline constexpr unsigned kMaxGolombPrefix = 32;

template <typename Sink>
concept BitSink = requires(Sink s, bool b) { s.put_bit(b); };

template <typename Source>
concept BitSource = requires(Source s) {
  { s.get_bit() } -> std::convertible_to<bool>;
};

template <BitSink Sink>
void exp_golomb_encode(Sink& sink, std::uint64_t n) {
  detail::require<ParameterError>(n < (std::uint64_t{1} << kMaxGolombPrefix) * 2 - 1,
                                  "exp-Golomb: value too large");
  const std::uint64_t v = n + 1;
  const int width = std::bit_width(v);
  for (int i = 1; i < width; ++i) sink.put_bit(false);
  for (int i = width - 1; i >= 0; --i) sink.put_bit((v >> i) & 1u);
}

template <BitSource Source>
std::uint64_t exp_golomb_decode(Source& source) {
  unsigned zeros = 0;
  while (!source.get_bit()) {
    ++zeros;
    detail::require<CorruptionError>(zeros <= kMaxGolombPrefix,
                                     "exp-Golomb: prefix longer than 32 zeros");
  }
  std::uint64_t v = 1;
  for (unsigned i = 0; i < zeros; ++i) v = (v << 1) | (source.get_bit() ? 1u : 0u);
  return v - 1;
}

inline std::size_t exp_golomb_length(std::uint64_t n) {
  return 2 * static_cast<std::size_t>(std::bit_width(n + 1)) - 1;
}

/// MSB-first bit packer.
class BitWriter {
 public:
  void put_bit(bool bit) {
    if (count_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (count_ % 8));
    ++count_;
  }
  std::size_t bit_count() const { return count_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::string to_string() const {
    std::string s;
    for (std::size_t i = 0; i < count_; ++i) s += (bytes_[i / 8] >> (7 - i % 8)) & 1u ? '1' : '0';
    return s;
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t count_ = 0;
};

class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> bytes, std::size_t bit_count)
      : bytes_(bytes), count_(bit_count) {}
  explicit BitReader(const BitWriter& w) : BitReader(w.bytes(), w.bit_count()) {}

  bool get_bit() {
    detail::require<CorruptionError>(pos_ < count_, "bit reader: out of bits");
    const bool bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
    ++pos_;
    return bit;
  }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t count_;
  std::size_t pos_ = 0;
};

}  // namespace ntc
