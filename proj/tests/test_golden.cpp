#include <gtest/gtest.h>

#include "golden.hpp"

namespace ntc {
namespace {

const std::string kDir = std::string(NTC_TEST_DATA_DIR) + "/golden";

TEST(Golden, CommittedVectorsReproduce) {
  for (const auto& c : testing::golden_cases()) {
    const auto o = testing::check_golden(kDir, c);
    EXPECT_TRUE(o.encode_matches) << o.detail;
    EXPECT_TRUE(o.decode_matches) << o.detail;
    EXPECT_TRUE(o.encode_repeatable) << o.detail;
  }
}

TEST(Golden, HeadersDescribeTheInputs) {
  for (const auto& c : testing::golden_cases()) {
    const Image input = read_image(c.input(kDir));
    const auto h = peek_header(read_file(c.compressed(kDir)));
    EXPECT_EQ(h.width, input.width);
    EXPECT_EQ(h.height, input.height);
    EXPECT_EQ(h.color, input.channels == 3);
    EXPECT_EQ(h.lambda_index, c.lambda_index);
  }
}

}  // namespace
}  // namespace ntc
