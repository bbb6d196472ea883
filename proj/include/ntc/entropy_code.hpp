#pragma once

// Binarization of the quantized code and its arithmetic coding with one
// context set per channel, shared across space.
//
// Decision tree for a value q under a pmf with support [q_min, q_max]:
//   node 0        q == mode?                       (true ends)
//   node 1        q > mode?
//   less chain    q == v? for v = mode-1 .. q_min  (true ends)
//   greater chain q == v? for v = mode+1 .. q_max  (true ends)
// Falling off a chain codes q_min - q - 1 or q - q_max - 1 with bypass
// exp-Golomb bits.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ntc/density.hpp"
#include "ntc/error.hpp"
#include "ntc/exp_golomb.hpp"
#include "ntc/range_coder.hpp"
#include "ntc/tensor.hpp"

namespace ntc {

enum class CodingMode : std::uint8_t {
  adaptive = 0,
  static_model = 1,  // contexts keep their initial probabilities
};

struct ChannelContexts {
  std::int32_t q_min = 0;
  std::int32_t q_max = 0;
  std::int32_t mode = 0;
  std::vector<Context> nodes;

  std::size_t less_node(std::int64_t v) const { return 2 + static_cast<std::size_t>(mode - 1 - v); }
  std::size_t greater_node(std::int64_t v) const {
    return 2 + static_cast<std::size_t>(mode - q_min) + static_cast<std::size_t>(v - mode - 1);
  }

  friend bool operator==(const ChannelContexts&, const ChannelContexts&) = default;
};

namespace detail {
inline double conditional(double numerator, double denominator) {
  return denominator > 0 ? numerator / denominator : 0.5;
}
}  // namespace detail

/// Node probabilities equal to the exact branch probabilities under the pmf.
inline ChannelContexts init_contexts_from_pmf(const DiscretePmf& pmf) {
  detail::require<ConfigError>(pmf.size() > 0 && pmf.contains(pmf.mode) &&
                                   static_cast<std::int64_t>(pmf.size()) ==
                                       std::int64_t{pmf.q_max} - pmf.q_min + 1,
                               "contexts: invalid pmf");
  ChannelContexts c{pmf.q_min, pmf.q_max, pmf.mode, {}};
  c.nodes.resize(2 + static_cast<std::size_t>(pmf.q_max - pmf.q_min));
  const double p_mode = pmf.prob(pmf.mode);
  double above = 0;
  for (std::int64_t v = pmf.mode + 1; v <= pmf.q_max; ++v) above += pmf.prob(v);
  double below = 0;
  for (std::int64_t v = pmf.q_min; v < pmf.mode; ++v) below += pmf.prob(v);
  c.nodes[0] = Context::from_probability(p_mode);
  c.nodes[1] = Context::from_probability(detail::conditional(above, above + below));

  double tail = below;  // mass of [q_min, v]
  for (std::int64_t v = pmf.mode - 1; v >= pmf.q_min; --v) {
    c.nodes[c.less_node(v)] = Context::from_probability(detail::conditional(pmf.prob(v), tail));
    tail -= pmf.prob(v);
  }
  tail = above;  // mass of [v, q_max]
  for (std::int64_t v = pmf.mode + 1; v <= pmf.q_max; ++v) {
    c.nodes[c.greater_node(v)] = Context::from_probability(detail::conditional(pmf.prob(v), tail));
    tail -= pmf.prob(v);
  }
  return c;
}

inline void binarize_encode(RangeEncoder& enc, ChannelContexts& ctx, std::int64_t q,
                            CodingMode mode = CodingMode::adaptive) {
  const bool adapt = mode == CodingMode::adaptive;
  if (q == ctx.mode) {
    enc.encode(ctx.nodes[0], true, adapt);
    return;
  }
  enc.encode(ctx.nodes[0], false, adapt);
  const bool greater = q > ctx.mode;
  enc.encode(ctx.nodes[1], greater, adapt);
  if (greater) {
    for (std::int64_t v = ctx.mode + 1; v <= ctx.q_max; ++v) {
      enc.encode(ctx.nodes[ctx.greater_node(v)], q == v, adapt);
      if (q == v) return;
    }
    exp_golomb_encode(enc, static_cast<std::uint64_t>(q - ctx.q_max - 1));
  } else {
    for (std::int64_t v = ctx.mode - 1; v >= ctx.q_min; --v) {
      enc.encode(ctx.nodes[ctx.less_node(v)], q == v, adapt);
      if (q == v) return;
    }
    exp_golomb_encode(enc, static_cast<std::uint64_t>(ctx.q_min - q - 1));
  }
}

inline std::int64_t binarize_decode(RangeDecoder& dec, ChannelContexts& ctx,
                                    CodingMode mode = CodingMode::adaptive) {
  const bool adapt = mode == CodingMode::adaptive;
  if (dec.decode(ctx.nodes[0], adapt)) return ctx.mode;
  if (dec.decode(ctx.nodes[1], adapt)) {
    for (std::int64_t v = ctx.mode + 1; v <= ctx.q_max; ++v)
      if (dec.decode(ctx.nodes[ctx.greater_node(v)], adapt)) return v;
    return ctx.q_max + 1 + static_cast<std::int64_t>(exp_golomb_decode(dec));
  }
  for (std::int64_t v = ctx.mode - 1; v >= ctx.q_min; --v)
    if (dec.decode(ctx.nodes[ctx.less_node(v)], adapt)) return v;
  return ctx.q_min - 1 - static_cast<std::int64_t>(exp_golomb_decode(dec));
}

/// Codes q channel by channel in raster order. One pmf per channel.
inline std::vector<std::uint8_t> encode_code(const QuantizedCode& q, std::span<const DiscretePmf> pmfs,
                                             CodingMode mode = CodingMode::adaptive) {
  detail::require<ParameterError>(pmfs.size() == q.channels(),
                                  "encode_code: one pmf per channel required");
  RangeEncoder enc;
  for (std::size_t c = 0; c < q.channels(); ++c) {
    auto ctx = init_contexts_from_pmf(pmfs[c]);
    for (std::int32_t v : q.channel(c)) binarize_encode(enc, ctx, v, mode);
  }
  return enc.finish();
}

inline QuantizedCode decode_code(std::span<const std::uint8_t> payload, Shape shape,
                                 std::span<const DiscretePmf> pmfs,
                                 CodingMode mode = CodingMode::adaptive) {
  detail::require<ParameterError>(pmfs.size() == shape.channels,
                                  "decode_code: one pmf per channel required");
  RangeDecoder dec(payload);
  QuantizedCode q(shape);
  for (std::size_t c = 0; c < shape.channels; ++c) {
    auto ctx = init_contexts_from_pmf(pmfs[c]);
    for (std::int32_t& v : q.channel(c)) {
      const std::int64_t value = binarize_decode(dec, ctx, mode);
      detail::require<CorruptionError>(value >= std::numeric_limits<std::int32_t>::min() &&
                                           value <= std::numeric_limits<std::int32_t>::max(),
                                       "decode_code: decoded value out of range");
      v = static_cast<std::int32_t>(value);
    }
  }
  dec.finish();
  return q;
}

/// Sum of -log2 P(q_i) under the per-channel pmfs; infinite if any value is
/// outside its support.
inline double model_codelength_bits(const QuantizedCode& q, std::span<const DiscretePmf> pmfs) {
  detail::require<ParameterError>(pmfs.size() == q.channels(),
                                  "model_codelength_bits: one pmf per channel required");
  double bits = 0;
  for (std::size_t c = 0; c < q.channels(); ++c)
    for (std::int32_t v : q.channel(c)) {
      const double p = pmfs[c].prob(v);
      if (p <= 0) return std::numeric_limits<double>::infinity();
      bits -= std::log2(p);
    }
  return bits;
}

}  // namespace ntc
