#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ntc/codec.hpp"
#include "ntc/container.hpp"
#include "ntc/synthetic.hpp"
#include "test_helpers.hpp"

namespace ntc {
namespace {

using testing::quick_model;

const ModelRegistry& gray_registry() {
  static const ModelRegistry r = [] {
    ModelRegistry reg;
    reg.add(3, quick_model(ArchitectureSpec::preset("desk"), 60, 21));
    return reg;
  }();
  return r;
}

const ModelRegistry& rgb_registry() {
  static const ModelRegistry r = [] {
    ModelRegistry reg;
    reg.add(0, quick_model(ArchitectureSpec::preset("desk-rgb"), 20, 22));
    return reg;
  }();
  return r;
}

Image test_image(std::size_t w, std::size_t h, std::size_t channels, std::uint64_t seed) {
  Rng rng(seed);
  return dead_leaves(w, h, channels, rng);
}

/// Straight-line reference: pad, g_a, round, g_s, back to 8 bits, crop.
Image direct_pipeline(const Image& img, const ModelEntry& e) {
  const auto& tp = e.model.transform;
  const std::size_t f = tp.spec.total_factor();
  const std::size_t ph = (img.height + f - 1) / f * f, pw = (img.width + f - 1) / f * f;
  Tensor x(img.channels, ph, pw);
  auto reflect = [](std::size_t i, std::size_t n) {
    // a b c | c b a | a b c ...
    std::size_t k = i;
    while (k >= n) k = k >= 2 * n ? k - 2 * n : 2 * n - 1 - k;
    return k;
  };
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < ph; ++y)
      for (std::size_t xx = 0; xx < pw; ++xx)
        x(c, y, xx) = img.at(reflect(xx, img.width), reflect(y, img.height), c) * e.model.pixel_scale +
                       e.model.pixel_offset;
  Tensor y = analysis_forward(x, tp.analysis, tp.spec.padding, false).y;
  for (double& v : y.values()) v = std::round(v);
  const Tensor x_hat = synthesis_forward(y, tp.synthesis, tp.spec.padding, false).x_hat;
  Image out(img.width, img.height, img.channels);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t r = 0; r < img.height; ++r)
      for (std::size_t q = 0; q < img.width; ++q) {
        const double v = std::clamp((x_hat(c, r, q) - e.model.pixel_offset) / e.model.pixel_scale, 0.0, 255.0);
        out.at(q, r, c) = static_cast<std::uint8_t>(std::floor(v + 0.5));
      }
  return out;
}

TEST(Container, RoundTripIsExact) {
  ModelRegistry reg;
  reg.add(7, gray_registry().at(3));
  auto second = gray_registry().at(3);
  second.model.lambda = 0.5;
  second.model.pixel_offset = -0.5;
  reg.add(1, second);
  const auto bytes = serialize_registry(reg);
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "NTC1");
  const auto back = parse_registry(bytes);
  EXPECT_EQ(back, reg);
  EXPECT_EQ(back.indices(), (std::vector<std::uint16_t>{1, 7}));
  EXPECT_EQ(serialize_registry(back), bytes);
}

TEST(Container, StoredPmfsAreUsedVerbatim) {
  ModelEntry e = gray_registry().at(3);
  e.pmfs[0].probs[0] *= 0.5;  // no longer what discretize() would produce
  ModelRegistry reg;
  reg.add(0, e);
  EXPECT_EQ(parse_registry(serialize_registry(reg)).at(0).pmfs, e.pmfs);
}

TEST(Container, TruncationAndGarbageAreCorruption) {
  const auto bytes = serialize_registry(gray_registry());
  for (std::size_t n : {std::size_t{0}, std::size_t{3}, std::size_t{11}, std::size_t{20}, bytes.size() / 2,
                        bytes.size() - 1}) {
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
    EXPECT_THROW(parse_registry(cut), CorruptionError) << n;
  }
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(parse_registry(bad), CorruptionError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(parse_registry(trailing), CorruptionError);
  auto version = bytes;
  version[4] = 2;
  EXPECT_THROW(parse_registry(version), CorruptionError);
}

TEST(Container, UnknownSectionsAreSkippedAndDuplicatesRejected) {
  auto bytes = serialize_registry(gray_registry());
  ByteWriter extra;
  extra.tag("XTRA");
  extra.u32(3);
  extra.raw(std::vector<std::uint8_t>{1, 2, 3});
  bytes[8] += 1;  // section count (single byte suffices here)
  bytes.insert(bytes.end(), extra.bytes().begin(), extra.bytes().end());
  EXPECT_EQ(parse_registry(bytes), gray_registry());

  auto dup = serialize_registry(gray_registry());
  const std::vector<std::uint8_t> section(dup.begin() + 12, dup.end());
  dup[8] = 2;
  dup.insert(dup.end(), section.begin(), section.end());
  EXPECT_THROW(parse_registry(dup), CorruptionError);
}

TEST(Container, RegistryRejectsUnknownIndex) {
  EXPECT_THROW(gray_registry().at(9), ConfigError);
  EXPECT_THROW(compress(test_image(16, 16, 1, 0), 9, gray_registry()), ConfigError);
}

TEST(Header, ByteLayout) {
  const auto file = compress(test_image(37, 23, 1, 1), 3, gray_registry());
  ASSERT_GE(file.size(), kHeaderBytes);
  const std::vector<std::uint8_t> head(file.begin(), file.begin() + kHeaderBytes);
  EXPECT_EQ(head, (std::vector<std::uint8_t>{'N', 'T', 'C', 'B', 37, 0, 23, 0, 0, 3, 0}));
  EXPECT_EQ(peek_header(file), (FileHeader{37, 23, false, 3}));
}

TEST(Header, ReservedBitsAndBadMagicAreCorruption) {
  auto file = compress(test_image(16, 16, 1, 2), 3, gray_registry());
  auto flags = file;
  flags[8] = 2;
  EXPECT_THROW(decompress(flags, gray_registry()), CorruptionError);
  auto magic = file;
  magic[3] = 'X';
  EXPECT_THROW(decompress(magic, gray_registry()), CorruptionError);
  auto color = file;
  color[8] = 1;
  EXPECT_THROW(decompress(color, gray_registry()), CorruptionError);
  auto index = file;
  index[9] = 4;
  EXPECT_THROW(decompress(index, gray_registry()), CorruptionError);
  auto zero = file;
  zero[4] = 0;
  EXPECT_THROW(decompress(zero, gray_registry()), CorruptionError);
}

TEST(Padding, MirrorIndex) {
  std::vector<std::size_t> got;
  for (std::size_t i = 0; i < 9; ++i) got.push_back(mirror_index(i, 3));
  EXPECT_EQ(got, (std::vector<std::size_t>{0, 1, 2, 2, 1, 0, 0, 1, 2}));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(mirror_index(i, 1), 0u);
  EXPECT_EQ(padded_size(1, 16), 16u);
  EXPECT_EQ(padded_size(16, 16), 16u);
  EXPECT_EQ(padded_size(17, 16), 32u);
}

TEST(Codec, MatchesDirectPipelineOnOddSizes) {
  const auto& e = gray_registry().at(3);
  for (auto [w, h] : {std::pair{37, 23}, std::pair{16, 16}, std::pair{1, 1}, std::pair{64, 5}, std::pair{50, 50}}) {
    const Image img = test_image(static_cast<std::size_t>(w), static_cast<std::size_t>(h), 1, 10 + w);
    const auto file = compress(img, 3, gray_registry());
    const Image out = decompress(file, gray_registry());
    EXPECT_EQ(out.width, img.width);
    EXPECT_EQ(out.height, img.height);
    EXPECT_EQ(out.data, direct_pipeline(img, e).data) << w << "x" << h;
  }
}

TEST(Codec, RgbMatchesDirectPipeline) {
  const Image img = test_image(40, 33, 3, 5);
  const auto file = compress(img, 0, rgb_registry());
  EXPECT_EQ(file[8], 1);
  const Image out = decompress(file, rgb_registry());
  EXPECT_EQ(out.channels, 3u);
  EXPECT_EQ(out.data, direct_pipeline(img, rgb_registry().at(0)).data);
  EXPECT_THROW(compress(test_image(16, 16, 1, 0), 0, rgb_registry()), ParameterError);
}

TEST(Codec, PayloadCloseToModelCodelength) {
  const auto& e = gray_registry().at(3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Image img = test_image(256, 192, 1, 100 + seed);
    const QuantizedCode q = analyze_and_quantize(img, e);
    const double ideal_bytes = model_codelength_bits(q, e.pmfs) / 8.0;
    ASSERT_TRUE(std::isfinite(ideal_bytes));
    const auto file = compress(img, 3, gray_registry());
    const double payload = static_cast<double>(file.size() - kHeaderBytes);
    EXPECT_LE(payload, 1.02 * ideal_bytes + 32) << "seed " << seed;
  }
}

TEST(Codec, DeterministicAndPure) {
  const Image img = test_image(70, 45, 1, 9);
  const auto a = compress(img, 3, gray_registry());
  const auto b = compress(img, 3, gray_registry());
  EXPECT_EQ(a, b);
  const ModelRegistry reloaded = parse_registry(serialize_registry(gray_registry()));
  EXPECT_EQ(compress(img, 3, reloaded), a);
  EXPECT_EQ(decompress(a, gray_registry()).data, decompress(a, reloaded).data);
}

TEST(Codec, DamagedFilesAreRejected) {
  const auto file = compress(test_image(48, 48, 1, 4), 3, gray_registry());
  for (std::size_t n : {std::size_t{0}, std::size_t{5}, kHeaderBytes - 1, kHeaderBytes, file.size() - 1}) {
    const std::vector<std::uint8_t> cut(file.begin(), file.begin() + static_cast<std::ptrdiff_t>(n));
    EXPECT_THROW(decompress(cut, gray_registry()), CorruptionError) << n;
  }
  auto trailing = file;
  trailing.insert(trailing.end(), {0x55, 0x55});
  EXPECT_THROW(decompress(trailing, gray_registry()), CorruptionError);
}

TEST(Codec, DimensionLimits) {
  EXPECT_THROW(compress(Image(65536, 1, 1), 3, gray_registry()), ParameterError);
  EXPECT_THROW(compress(Image(0, 4, 1), 3, gray_registry()), ParameterError);
}

TEST(RdCurve, SingleImageRateIsFileSize) {
  const Image img = test_image(40, 24, 1, 12);
  const std::vector<Image> images{img};
  const std::vector<std::uint16_t> idx{3};
  const auto points = rd_curve(images, gray_registry(), idx);
  ASSERT_EQ(points.size(), 1u);
  const auto file = compress(img, 3, gray_registry());
  EXPECT_DOUBLE_EQ(points[0].bpp, 8.0 * static_cast<double>(file.size()) / (40.0 * 24.0));
  EXPECT_DOUBLE_EQ(points[0].psnr, psnr(img, decompress(file, gray_registry())));
  EXPECT_TRUE(std::isnan(points[0].ms_ssim));  // below the 176-pixel minimum
  EXPECT_EQ(points[0].lambda, gray_registry().at(3).model.lambda);
}

}  // namespace
}  // namespace ntc
