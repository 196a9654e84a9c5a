/*
 * Copyright 2026 The fedcgs Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fedcgs/dataio.hpp"
#include "fedcgs/gnb_head.hpp"
#include "fedcgs/metrics.hpp"
#include "fedcgs/server_agg.hpp"
#include "fedcgs/client_stats.hpp"
#include "oracles.hpp"

namespace fedcgs {
namespace {

namespace fs = std::filesystem;

class DataIoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fedcgs_dataio_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path path(const char* name) const { return dir_ / name; }

  fs::path dir_;
};

TEST_F(DataIoTest, SmallSetRoundTripsBitExactly) {
  LabeledFeatureSet s{Matrix(2, 3), {0, 1}, 2};
  s.features(0, 0) = 1.0;
  s.features(1, 1) = 1.0;
  write_feature_file(s, path("small.fcgs"));
  EXPECT_EQ(read_feature_file(path("small.fcgs")), s);
}

TEST_F(DataIoTest, RandomSetsRoundTrip) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = oracle::random_set(1 + seed * 37, 1 + seed % 9, 1 + seed % 5, seed, 1e3);
    write_feature_file(s, path("r.fcgs"));
    const auto back = read_feature_file(path("r.fcgs"));
    EXPECT_EQ(back, s);
    std::size_t total = 0;
    for (auto h : back.class_histogram()) total += h;
    EXPECT_EQ(total, back.size());
  }
}

TEST_F(DataIoTest, FileSizeMatchesLayout) {
  const auto s = oracle::random_set(1000, 16, 4, 1);
  write_feature_file(s, path("sized.fcgs"));
  EXPECT_EQ(fs::file_size(path("sized.fcgs")), 24u + 1000u * 16u * 4u + 1000u * 4u);
  EXPECT_EQ(feature_file_size(1000, 16), 68024u);
}

TEST_F(DataIoTest, TruncatedPayloadIsRejected) {
  const auto s = oracle::random_set(100, 3, 2, 2);
  auto bytes = encode_feature_set(s);
  // Drop the last row's worth of payload: the header still says N=100.
  bytes.resize(bytes.size() - (3 * 4 + 4));
  EXPECT_THROW(decode_feature_set(bytes), TruncationError);
  io::write_bytes(path("trunc.fcgs"), bytes);
  EXPECT_THROW(read_feature_file(path("trunc.fcgs")), TruncationError);
  EXPECT_THROW(decode_feature_set(std::span(bytes.data(), 10)), TruncationError);
}

TEST_F(DataIoTest, BadMagicAndVersion) {
  auto bytes = encode_feature_set(oracle::random_set(4, 2, 2, 3));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_feature_set(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_THROW(decode_feature_set(bad_version), FormatError);
}

TEST_F(DataIoTest, LabelOutOfRangeIsIntegrityError) {
  auto bytes = encode_feature_set(oracle::random_set(4, 2, 2, 3));
  bytes[bytes.size() - 4] = 7;  // last label
  EXPECT_THROW(decode_feature_set(bytes), IntegrityError);
}

TEST_F(DataIoTest, HeaderFieldsAreLittleEndian) {
  const auto bytes = encode_feature_set(oracle::random_set(3, 5, 7, 4));
  ASSERT_GE(bytes.size(), 24u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FCGS");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 3);
  EXPECT_EQ(bytes[16], 5);
  EXPECT_EQ(bytes[20], 7);
}

TEST_F(DataIoTest, EmptyPathIsIoError) {
  EXPECT_THROW(write_feature_file(oracle::random_set(2, 2, 2, 1), ""), IoError);
  EXPECT_THROW(read_feature_file(path("missing.fcgs")), IoError);
}

TEST(Synthetic, DeterministicForSeed) {
  SyntheticSpec spec{.num_classes = 4, .dim = 8, .samples_per_class = 50, .seed = 7};
  EXPECT_EQ(generate_synthetic(spec), generate_synthetic(spec));
  spec.seed = 8;
  SyntheticSpec other = spec;
  other.seed = 7;
  EXPECT_NE(generate_synthetic(spec), generate_synthetic(other));
}

TEST(Synthetic, ExactlySamplesPerClass) {
  const auto s = generate_synthetic({.num_classes = 3, .dim = 4, .samples_per_class = 100});
  EXPECT_EQ(s.size(), 300u);
  for (auto h : s.class_histogram()) EXPECT_EQ(h, 100u);
}

TEST(Synthetic, MeansHaveRequestedNorm) {
  const SyntheticSpec spec{.num_classes = 5, .dim = 6, .class_mean_scale = 2.5, .seed = 1};
  for (const auto& m : synthetic_class_means(spec)) EXPECT_NEAR(norm2(m.span()), 2.5, 1e-12);
}

TEST(Synthetic, InvalidSpecThrows) {
  EXPECT_THROW(generate_synthetic({.num_classes = 0}), Error);
  EXPECT_THROW(generate_synthetic({.class_mean_scale = -1.0}), Error);
}

// Two well separated classes: the closed-form head comes within two points
// of the Bayes rule that knows the generating parameters.
TEST(Synthetic, HeadTracksBayesRuleOnMatchedData) {
  // Class means are a function of the seed, so train and test rows come
  // from one draw split per class.
  const SyntheticSpec big{.num_classes = 2, .dim = 8, .samples_per_class = 2000,
                          .class_mean_scale = 2.0, .shared_covariance_scale = 1.0, .seed = 31};
  const auto all = generate_synthetic(big);
  std::vector<std::size_t> tr;
  std::vector<std::size_t> te;
  for (std::size_t i = 0; i < all.size(); ++i) ((i % 2000) < 1000 ? tr : te).push_back(i);
  const auto train_split = subset(all, tr);
  const auto test_split = subset(all, te);

  const auto head = build_head(aggregate(compute_client_stats(train_split)));
  const double acc = evaluate(head, test_split);

  std::vector<std::vector<double>> means;
  for (const auto& m : synthetic_class_means(big)) means.push_back(m.values());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test_split.size(); ++i)
    hits += oracle::bayes_isotropic(test_split.row(i), means, {0.5, 0.5}, 1.0) == test_split.labels[i];
  const double bayes = static_cast<double>(hits) / static_cast<double>(test_split.size());
  EXPECT_LE(std::abs(acc - bayes), 0.02) << "head " << acc << " vs Bayes " << bayes;
}

}  // namespace
}  // namespace fedcgs
