#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <limits>

#include "steps/errors.hpp"
#include "steps/param_file.hpp"
#include "test_util.hpp"

namespace {

using namespace steps;

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

ParamFile sample_file() {
  Matrix special(2, 3);
  special << -0.0, std::numeric_limits<double>::denorm_min(), std::numeric_limits<double>::max(),
      std::numeric_limits<double>::infinity(), 1.0 / 3.0, -7.25;
  ParamFile f;
  f.kind = "test";
  f.header = {{"answer", 42}, {"label", "x"}};
  f.blocks = {{"special", special}, {"random", steps::testing::random_matrix(5, 4, 3)}, {"empty", Matrix(0, 3)}};
  return f;
}

TEST(ParamFile, BitExactRoundTrip) {
  const ParamFile f = sample_file();
  const std::string bytes = encode_param_file(f);
  EXPECT_EQ(bytes.substr(0, 8), "STEPSPAR");
  const ParamFile back = decode_param_file(bytes);
  EXPECT_EQ(back.kind, "test");
  EXPECT_EQ(back.header.at("answer").get<int>(), 42);
  ASSERT_EQ(back.blocks.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.blocks[i].name, f.blocks[i].name);
    EXPECT_TRUE(same_bits(back.blocks[i].values, f.blocks[i].values));
  }
  EXPECT_EQ(encode_param_file(back), bytes);
}

TEST(ParamFile, RowMajorLittleEndianLayout) {
  ParamFile f;
  f.kind = "k";
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  f.blocks = {{"m", m}};
  const std::string bytes = encode_param_file(f);
  double tail[4];
  std::memcpy(tail, bytes.data() + bytes.size() - sizeof tail, sizeof tail);
  EXPECT_EQ(tail[0], 1.0);
  EXPECT_EQ(tail[1], 2.0);
  EXPECT_EQ(tail[2], 3.0);
  EXPECT_EQ(tail[3], 4.0);
}

TEST(ParamFile, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "steps_param_file_test.stp";
  write_param_file(path, sample_file());
  const ParamFile back = read_param_file(path);
  EXPECT_TRUE(same_bits(back.block("random"), sample_file().block("random")));
  std::filesystem::remove(path);
}

TEST(ParamFile, CorruptionDetected) {
  const std::string bytes = encode_param_file(sample_file());
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_param_file(bad_magic), Error);
  EXPECT_THROW(decode_param_file(bytes.substr(0, bytes.size() - 3)), Error);
  EXPECT_THROW(decode_param_file(bytes + "z"), Error);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(decode_param_file(bad_version), Error);
  EXPECT_THROW(sample_file().block("missing"), Error);
  EXPECT_THROW(read_param_file("/nonexistent/p.stp"), Error);
}

TEST(ParamFile, DigestSensitivity) {
  Matrix a = steps::testing::random_matrix(3, 3, 1);
  const auto d0 = digest_matrices({&a});
  EXPECT_EQ(digest_matrices({&a}), d0);
  a(1, 1) = std::nextafter(a(1, 1), 10.0);
  EXPECT_NE(digest_matrices({&a}), d0);
  const Matrix flat = Eigen::Map<Matrix>(a.data(), 9, 1);
  EXPECT_NE(digest_matrices({&flat}), digest_matrices({&a}));
}

}  // namespace
