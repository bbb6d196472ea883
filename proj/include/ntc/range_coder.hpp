#pragma once

// Binary range coder with 16-bit fixed-point adaptive contexts. Integer-only,
// so encoder and decoder state trajectories are identical on every platform.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ntc/error.hpp"

namespace ntc {

inline constexpr unsigned kProbBits = 16;
inline constexpr std::uint32_t kProbOne = 1u << kProbBits;
inline constexpr std::uint32_t kProbMin = 1;
inline constexpr std::uint32_t kProbMax = kProbOne - 1;
inline constexpr unsigned kAdaptShift = 5;
inline constexpr std::uint32_t kTopValue = 1u << 24;

/// Probability of "true" in units of 2^-16, kept inside [1, 2^16 - 1].
struct Context {
  std::uint16_t prob = kProbOne / 2;
  std::uint32_t updates = 0;

  static Context from_probability(double p) {
    const double scaled = std::nearbyint(p * static_cast<double>(kProbOne));
    const double clamped =
        std::clamp(std::isfinite(scaled) ? scaled : 0.0, double(kProbMin), double(kProbMax));
    return Context{static_cast<std::uint16_t>(clamped), 0};
  }

  double probability() const { return static_cast<double>(prob) / kProbOne; }

  void update(bool bit) {
    const std::int32_t target = bit ? static_cast<std::int32_t>(kProbOne) : 0;
    std::int32_t p = prob;
    p += (target - p) >> kAdaptShift;
    prob = static_cast<std::uint16_t>(std::clamp<std::int32_t>(p, kProbMin, kProbMax));
    ++updates;
  }

  friend bool operator==(const Context&, const Context&) = default;
};

class RangeEncoder {
 public:
  void encode(Context& ctx, bool bit, bool adapt = true) {
    const std::uint32_t bound = (range_ >> kProbBits) * ctx.prob;
    if (bit) {
      range_ = bound;
    } else {
      low_ += bound;
      range_ -= bound;
    }
    if (adapt) ctx.update(bit);
    normalize();
  }

  /// Equiprobable bit that does not touch any context.
  void encode_bypass(bool bit) {
    range_ >>= 1;
    if (bit) low_ += range_;
    normalize();
  }

  void put_bit(bool bit) { encode_bypass(bit); }

  /// Flushes the coder; the encoder must not be used afterwards.
  std::vector<std::uint8_t> finish() {
    for (int i = 0; i < 5; ++i) shift_low();
    return std::move(out_);
  }

  std::size_t bytes_written() const { return out_.size(); }

 private:
  void normalize() {
    while (range_ < kTopValue) {
      range_ <<= 8;
      shift_low();
    }
  }

  // Carry-propagating byte output. The very first byte is always zero and is
  // dropped from the stream.
  void shift_low() {
    if (low_ < 0xFF000000ull || low_ >= (1ull << 32)) {
      const auto carry = static_cast<std::uint8_t>(low_ >> 32);
      std::uint8_t byte = cache_;
      do {
        if (started_) out_.push_back(static_cast<std::uint8_t>(byte + carry));
        started_ = true;
        byte = 0xFF;
      } while (--cache_size_ != 0);
      cache_ = static_cast<std::uint8_t>(low_ >> 24);
    }
    ++cache_size_;
    low_ = (low_ << 8) & 0xFFFFFFFFull;
  }

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  bool started_ = false;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> data) : data_(data) {
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
  }

  bool decode(Context& ctx, bool adapt = true) {
    const std::uint32_t bound = (range_ >> kProbBits) * ctx.prob;
    bool bit;
    if (code_ < bound) {
      range_ = bound;
      bit = true;
    } else {
      code_ -= bound;
      range_ -= bound;
      bit = false;
    }
    if (adapt) ctx.update(bit);
    normalize();
    return bit;
  }

  bool decode_bypass() {
    range_ >>= 1;
    bool bit = false;
    if (code_ >= range_) {
      code_ -= range_;
      bit = true;
    }
    normalize();
    return bit;
  }

  bool get_bit() { return decode_bypass(); }

  /// Throws CorruptionError unless every byte was consumed.
  void finish() const {
    detail::require<CorruptionError>(pos_ == data_.size(),
                                     "range decoder: trailing bytes after payload");
  }

  std::size_t bytes_consumed() const { return pos_; }

 private:
  std::uint32_t next_byte() {
    detail::require<CorruptionError>(pos_ < data_.size(), "range decoder: bitstream exhausted");
    return data_[pos_++];
  }

  void normalize() {
    while (range_ < kTopValue) {
      range_ <<= 8;
      code_ = (code_ << 8) | next_byte();
    }
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

}  // namespace ntc
