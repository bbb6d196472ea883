#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "ntc/image_io.hpp"
#include "ntc/random.hpp"

namespace ntc {
namespace {

Image noise_image(std::size_t w, std::size_t h, std::size_t channels, std::uint64_t seed) {
  Rng rng(seed);
  Image img(w, h, channels);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("ntc_io_" + name)).string();
}

TEST(Png, RoundTripGrayAndRgb) {
  for (std::size_t channels : {1u, 3u}) {
    const Image img = noise_image(23, 17, channels, channels);
    const auto bytes = encode_png(img);
    EXPECT_TRUE(is_png(bytes));
    const Image back = decode_png(bytes);
    EXPECT_EQ(back.width, 23u);
    EXPECT_EQ(back.height, 17u);
    EXPECT_EQ(back.channels, channels);
    EXPECT_EQ(back.data, img.data);
  }
}

TEST(Png, CorruptDataIsRejected) {
  auto bytes = encode_png(noise_image(16, 16, 1, 3));
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + 40);
  EXPECT_THROW(decode_png(cut), CorruptionError);
  bytes[bytes.size() / 2] ^= 0xFF;
  EXPECT_THROW(decode_png(bytes), CorruptionError);
  EXPECT_THROW(decode_image(std::vector<std::uint8_t>{1, 2, 3}), CorruptionError);
}

TEST(Pnm, RoundTripAndComments) {
  const Image gray = noise_image(5, 3, 1, 4);
  EXPECT_EQ(decode_pnm(encode_pnm(gray)).data, gray.data);
  const Image rgb = noise_image(4, 2, 3, 5);
  EXPECT_EQ(decode_pnm(encode_pnm(rgb)).data, rgb.data);

  const std::string header = "P5\n# comment\n2 # width\n2\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), {1, 2, 3, 4});
  const Image img = decode_image(bytes);
  EXPECT_EQ(img.width, 2u);
  EXPECT_EQ(img.data, (std::vector<std::uint8_t>{1, 2, 3, 4}));
}

TEST(Pnm, MalformedFilesAreRejected) {
  auto bytes = encode_pnm(noise_image(5, 3, 1, 6));
  bytes.pop_back();
  EXPECT_THROW(decode_pnm(bytes), CorruptionError);
  const std::string wide = "P5\n2 2\n65535\n";
  EXPECT_THROW(decode_pnm(std::vector<std::uint8_t>(wide.begin(), wide.end())), CorruptionError);
  const std::string ascii = "P2\n2 2\n255\n";
  EXPECT_THROW(decode_image(std::vector<std::uint8_t>(ascii.begin(), ascii.end())), CorruptionError);
}

TEST(ImageFiles, ExtensionSelectsFormat) {
  const Image gray = noise_image(7, 9, 1, 7);
  const Image rgb = noise_image(7, 9, 3, 8);
  for (const auto& [name, img] : {std::pair{std::string("a.png"), gray}, std::pair{std::string("b.pgm"), gray},
                                  std::pair{std::string("c.ppm"), rgb}, std::pair{std::string("d.PNG"), rgb}}) {
    const std::string path = temp_path(name);
    write_image(path, img);
    const auto bytes = read_file(path);
    EXPECT_EQ(is_png(bytes), name.back() == 'g' || name.back() == 'G') << name;
    EXPECT_EQ(read_image(path).data, img.data) << name;
    std::filesystem::remove(path);
  }
  EXPECT_THROW(write_image(temp_path("e.pgm"), rgb), ParameterError);
  EXPECT_THROW(read_image(temp_path("missing.png")), IoError);
}

}  // namespace
}  // namespace ntc
