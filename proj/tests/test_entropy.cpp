#include <gtest/gtest.h>

#include <cmath>

#include "ntc/entropy_code.hpp"
#include "ntc/random.hpp"

namespace ntc {
namespace {

DiscretePmf laplace_pmf(double scale, std::int32_t lo, std::int32_t hi, double center = 0) {
  DiscretePmf pmf{lo, hi, {}, 0};
  for (std::int32_t n = lo; n <= hi; ++n) pmf.probs.push_back(std::exp(-std::abs(n - center) / scale));
  pmf.normalize();
  return pmf;
}

std::int32_t sample_pmf(const DiscretePmf& pmf, Rng& rng) {
  double u = rng.uniform();
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    u -= pmf.probs[i];
    if (u < 0) return pmf.q_min + static_cast<std::int32_t>(i);
  }
  return pmf.q_max;
}

double binary_entropy(double p) { return -p * std::log2(p) - (1 - p) * std::log2(1 - p); }

TEST(RangeCoder, RandomBitsRoundtripWithAdaptiveContexts) {
  Rng rng(1);
  std::vector<Context> enc_ctx(8), dec_ctx;
  for (auto& c : enc_ctx) c = Context::from_probability(rng.uniform(0.01, 0.99));
  dec_ctx = enc_ctx;
  std::vector<bool> bits;
  std::vector<std::size_t> which;
  RangeEncoder enc;
  for (int i = 0; i < 10000; ++i) {
    const auto k = rng.below(9);
    const bool bit = rng.uniform() < 0.3 + 0.05 * static_cast<double>(k);
    which.push_back(k);
    bits.push_back(bit);
    if (k == 8)
      enc.encode_bypass(bit);
    else
      enc.encode(enc_ctx[k], bit);
  }
  const auto bytes = enc.finish();
  RangeDecoder dec(bytes);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const bool got = which[i] == 8 ? dec.decode_bypass() : dec.decode(dec_ctx[which[i]]);
    ASSERT_EQ(got, bits[i]) << "at " << i;
  }
  EXPECT_NO_THROW(dec.finish());
  EXPECT_EQ(enc_ctx, dec_ctx);
}

TEST(RangeCoder, HalfProbabilityCostsOneBit) {
  Rng rng(2);
  Context ctx;
  RangeEncoder enc;
  const int n = 100000;
  for (int i = 0; i < n; ++i) enc.encode(ctx, rng.uniform() < 0.5, false);
  const double bits_per_bit = 8.0 * static_cast<double>(enc.finish().size()) / n;
  EXPECT_NEAR(bits_per_bit, 1.0, 0.01);
}

TEST(RangeCoder, StaticProbabilityApproachesBinaryEntropy) {
  for (double p : {0.1, 0.25, 0.5}) {
    Rng rng(3);
    const auto start = Context::from_probability(p);
    Context ctx = start;
    RangeEncoder enc;
    const int n = 100000;
    double ideal = 0;
    std::vector<bool> bits;
    for (int i = 0; i < n; ++i) {
      const bool bit = rng.uniform() < p;
      bits.push_back(bit);
      ideal -= std::log2(bit ? p : 1 - p);
      enc.encode(ctx, bit, false);
    }
    EXPECT_EQ(ctx, start);
    const auto bytes = enc.finish();
    const double cost = 8.0 * static_cast<double>(bytes.size()) / n;
    EXPECT_NEAR(cost / binary_entropy(p), 1.0, 0.01) << "p=" << p;
    EXPECT_NEAR(cost * n / ideal, 1.0, 0.002) << "p=" << p;
    RangeDecoder dec(bytes);
    for (int i = 0; i < n; ++i) ASSERT_EQ(dec.decode(ctx, false), bits[i]);
    dec.finish();
  }
}

TEST(RangeCoder, ContextAdaptationRule) {
  Context c = Context::from_probability(0.5);
  c.update(true);
  EXPECT_EQ(c.prob, 32768 + 1024);
  c = Context{1, 0};
  c.update(false);
  EXPECT_EQ(c.prob, kProbMin);
  c = Context{kProbMax, 0};
  c.update(true);
  EXPECT_EQ(c.prob, kProbMax);
  EXPECT_EQ(c.updates, 1u);
  EXPECT_EQ(Context::from_probability(0.0).prob, kProbMin);
  EXPECT_EQ(Context::from_probability(1.0).prob, kProbMax);
}

TEST(RangeCoder, ExhaustedAndTrailingBytesAreCorruption) {
  Rng rng(4);
  Context ctx;
  RangeEncoder enc;
  std::vector<bool> bits;
  for (int i = 0; i < 2000; ++i) {
    bits.push_back(rng.uniform() < 0.2);
    enc.encode(ctx, bits.back());
  }
  auto bytes = enc.finish();
  auto decode_all = [&](std::span<const std::uint8_t> data) {
    Context c;
    RangeDecoder dec(data);
    for (std::size_t i = 0; i < bits.size(); ++i) dec.decode(c);
    dec.finish();
  };
  EXPECT_NO_THROW(decode_all(bytes));
  EXPECT_THROW(decode_all(std::span(bytes).first(bytes.size() - 1)), CorruptionError);
  bytes.push_back(0);
  EXPECT_THROW(decode_all(bytes), CorruptionError);
  EXPECT_THROW(RangeDecoder(std::span<const std::uint8_t>()), CorruptionError);
}

TEST(ExpGolomb, KnownCodewords) {
  auto code = [](std::uint64_t n) {
    BitWriter w;
    exp_golomb_encode(w, n);
    EXPECT_EQ(w.bit_count(), exp_golomb_length(n));
    return w.to_string();
  };
  EXPECT_EQ(code(0), "1");
  EXPECT_EQ(code(1), "010");
  EXPECT_EQ(code(2), "011");
  EXPECT_EQ(code(3), "00100");
  EXPECT_EQ(code(6), "00111");
  EXPECT_EQ(code(7), "0001000");
}

TEST(ExpGolomb, ExhaustiveRoundtrip) {
  BitWriter w;
  for (std::uint64_t n = 0; n <= 10000; ++n) exp_golomb_encode(w, n);
  const std::uint64_t big = (std::uint64_t{1} << 33) - 2;
  exp_golomb_encode(w, big);
  BitReader r(w);
  for (std::uint64_t n = 0; n <= 10000; ++n) ASSERT_EQ(exp_golomb_decode(r), n);
  EXPECT_EQ(exp_golomb_decode(r), big);
  EXPECT_EQ(r.position(), w.bit_count());
  EXPECT_THROW(exp_golomb_encode(w, big + 1), ParameterError);
}

TEST(ExpGolomb, MalformedPrefixIsCorruption) {
  BitWriter w;
  for (int i = 0; i < 40; ++i) w.put_bit(false);
  w.put_bit(true);
  BitReader r(w);
  EXPECT_THROW(exp_golomb_decode(r), CorruptionError);
  BitWriter truncated;
  truncated.put_bit(false);
  truncated.put_bit(false);
  truncated.put_bit(true);
  BitReader r2(truncated);
  EXPECT_THROW(exp_golomb_decode(r2), CorruptionError);
}

TEST(Contexts, UniformThreeSymbols) {
  DiscretePmf pmf{-1, 1, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0};
  const auto c = init_contexts_from_pmf(pmf);
  ASSERT_EQ(c.nodes.size(), 4u);
  EXPECT_NEAR(c.nodes[0].probability(), 1.0 / 3, 1e-4);
  EXPECT_NEAR(c.nodes[1].probability(), 0.5, 1e-4);
  // Last chain node on each side is certain.
  EXPECT_EQ(c.nodes[c.less_node(-1)].prob, kProbMax);
  EXPECT_EQ(c.nodes[c.greater_node(1)].prob, kProbMax);
}

TEST(Contexts, PointMassClampsToOneMinusDelta) {
  DiscretePmf pmf{-2, 2, {0, 0, 1, 0, 0}, 0};
  pmf.normalize();
  const auto c = init_contexts_from_pmf(pmf);
  EXPECT_EQ(c.nodes[0].prob, kProbMax);
  EXPECT_EQ(c.nodes.size(), 6u);
}

TEST(Contexts, ChainNodesAreConditionalProbabilities) {
  const auto pmf = laplace_pmf(1.7, -6, 9, 1.0);
  ASSERT_EQ(pmf.mode, 1);
  const auto c = init_contexts_from_pmf(pmf);
  // Probability of each value as the product of branch probabilities.
  for (std::int32_t q = pmf.q_min; q <= pmf.q_max; ++q) {
    double p;
    if (q == pmf.mode) {
      p = c.nodes[0].probability();
    } else {
      p = 1 - c.nodes[0].probability();
      const bool greater = q > pmf.mode;
      p *= greater ? c.nodes[1].probability() : 1 - c.nodes[1].probability();
      for (std::int32_t v = greater ? pmf.mode + 1 : pmf.mode - 1;; v += greater ? 1 : -1) {
        const double pv = c.nodes[greater ? c.greater_node(v) : c.less_node(v)].probability();
        if (v == q) {
          p *= pv;
          break;
        }
        p *= 1 - pv;
      }
    }
    EXPECT_NEAR(p / pmf.prob(q), 1.0, 0.01) << q;
  }
}

std::size_t decisions_for(std::int64_t q, const DiscretePmf& pmf) {
  auto ctx = init_contexts_from_pmf(pmf);
  RangeEncoder enc;
  binarize_encode(enc, ctx, q);
  std::size_t n = 0;
  for (const auto& node : ctx.nodes) n += node.updates;
  return n;
}

TEST(Binarization, DecisionCounts) {
  const auto pmf = laplace_pmf(1.0, -3, 4);
  EXPECT_EQ(decisions_for(0, pmf), 1u);
  EXPECT_EQ(decisions_for(-1, pmf), 3u);
  EXPECT_EQ(decisions_for(2, pmf), 4u);
  EXPECT_EQ(decisions_for(-3, pmf), 5u);
  // Beyond q_max: full greater chain, then bypass bits only.
  EXPECT_EQ(decisions_for(pmf.q_max + 5, pmf), 2u + 4u);
}

TEST(Binarization, ExcessBeyondBoundUsesGolombOffset) {
  const auto pmf = laplace_pmf(1.0, -3, 4);
  for (std::int64_t q : {std::int64_t{pmf.q_max} + 5, std::int64_t{pmf.q_min} - 5}) {
    auto ctx = init_contexts_from_pmf(pmf);
    RangeEncoder enc;
    binarize_encode(enc, ctx, q);
    const auto bytes = enc.finish();
    // Walk the tree by hand on the decode side.
    auto dctx = init_contexts_from_pmf(pmf);
    RangeDecoder dec(bytes);
    EXPECT_FALSE(dec.decode(dctx.nodes[0]));
    const bool greater = dec.decode(dctx.nodes[1]);
    EXPECT_EQ(greater, q > 0);
    if (greater)
      for (std::int64_t v = 1; v <= pmf.q_max; ++v) EXPECT_FALSE(dec.decode(dctx.nodes[dctx.greater_node(v)]));
    else
      for (std::int64_t v = -1; v >= pmf.q_min; --v) EXPECT_FALSE(dec.decode(dctx.nodes[dctx.less_node(v)]));
    EXPECT_EQ(exp_golomb_decode(dec), 4u);
    dec.finish();
  }
}

TEST(Binarization, ModeAtSupportEdge) {
  DiscretePmf pmf{0, 3, {0.7, 0.2, 0.07, 0.03}, 0};
  pmf.normalize();
  ASSERT_EQ(pmf.mode, 0);
  QuantizedCode q(1, 1, 8);
  const std::int32_t values[] = {0, 1, -1, -7, 3, 4, 100, 0};
  std::copy(std::begin(values), std::end(values), q.values().begin());
  const std::vector<DiscretePmf> pmfs{pmf};
  EXPECT_EQ(decode_code(encode_code(q, pmfs), q.shape(), pmfs), q);
}

TEST(EntropyCode, LosslessOnRandomTensorsIncludingOutliers) {
  Rng rng(6);
  for (int trial = 0; trial < 10000; ++trial) {
    const Shape shape{1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(4)};
    std::vector<DiscretePmf> pmfs;
    for (std::size_t c = 0; c < shape.channels; ++c) {
      const auto lo = -static_cast<std::int32_t>(rng.below(5));
      const auto hi = static_cast<std::int32_t>(rng.below(5));
      pmfs.push_back(laplace_pmf(rng.uniform(0.2, 3.0), lo, hi, rng.uniform(lo, hi)));
    }
    QuantizedCode q(shape);
    for (std::size_t c = 0; c < shape.channels; ++c)
      for (auto& v : q.channel(c)) {
        const double u = rng.uniform();
        if (u < 0.05)
          v = static_cast<std::int32_t>(rng.below(2000000)) - 1000000;
        else if (u < 0.06)
          v = u < 0.055 ? std::numeric_limits<std::int32_t>::max() : std::numeric_limits<std::int32_t>::min();
        else
          v = sample_pmf(pmfs[c], rng);
      }
    const auto mode = trial % 2 ? CodingMode::adaptive : CodingMode::static_model;
    const auto payload = encode_code(q, pmfs, mode);
    ASSERT_EQ(decode_code(payload, shape, pmfs, mode), q) << "trial " << trial;
  }
}

TEST(EntropyCode, DeterministicPayload) {
  Rng rng(7);
  const auto pmf = laplace_pmf(2.0, -10, 10);
  QuantizedCode q(2, 16, 16);
  for (auto& v : q.values()) v = sample_pmf(pmf, rng);
  const std::vector<DiscretePmf> pmfs{pmf, pmf};
  EXPECT_EQ(encode_code(q, pmfs), encode_code(q, pmfs));
}

TEST(EntropyCode, AllModeCodeIsTiny) {
  const auto pmf = laplace_pmf(2.0, -10, 10);
  QuantizedCode q(4, 32, 32, 0);
  const std::vector<DiscretePmf> pmfs(4, pmf);
  const auto payload = encode_code(q, pmfs);
  const double uniform_bits = static_cast<double>(q.size()) * std::log2(21.0);
  EXPECT_LT(8.0 * static_cast<double>(payload.size()), 0.05 * uniform_bits);
}

TEST(EntropyCode, PayloadCloseToModelCodelength) {
  Rng rng(8);
  for (double scale : {0.3, 1.0, 4.0}) {
    const auto pmf = laplace_pmf(scale, -40, 40);
    QuantizedCode q(4, 64, 64);
    for (auto& v : q.values()) v = sample_pmf(pmf, rng);
    const std::vector<DiscretePmf> pmfs(4, pmf);
    const double ideal_bytes = model_codelength_bits(q, pmfs) / 8;
    for (auto mode : {CodingMode::adaptive, CodingMode::static_model}) {
      const auto payload = encode_code(q, pmfs, mode);
      EXPECT_LE(static_cast<double>(payload.size()), 1.02 * ideal_bytes + 32)
          << "scale " << scale << " mode " << int(mode);
      EXPECT_EQ(decode_code(payload, q.shape(), pmfs, mode), q);
    }
  }
}

TEST(EntropyCode, AdaptiveBeatsStaticUnderModelMismatch) {
  Rng rng(9);
  const auto seed_pmf = laplace_pmf(1.0, -20, 20);
  const auto true_pmf = laplace_pmf(3.0, -20, 20, 1.0);
  int wins = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    QuantizedCode q(1, 100, 200);
    for (auto& v : q.values()) v = sample_pmf(true_pmf, rng);
    const std::vector<DiscretePmf> pmfs{seed_pmf};
    const auto adaptive = encode_code(q, pmfs, CodingMode::adaptive).size();
    const auto fixed = encode_code(q, pmfs, CodingMode::static_model).size();
    wins += adaptive < fixed;
  }
  EXPECT_GE(wins, trials * 9 / 10);
}

TEST(EntropyCode, ChannelCountMismatchIsParameterError) {
  QuantizedCode q(2, 2, 2);
  const std::vector<DiscretePmf> pmfs{laplace_pmf(1.0, -1, 1)};
  EXPECT_THROW(encode_code(q, pmfs), ParameterError);
  EXPECT_THROW(decode_code({}, q.shape(), pmfs), ParameterError);
}

}  // namespace
}  // namespace ntc
