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

#include <vector>

#include "fedcgs/client_stats.hpp"
#include "fedcgs/feature_expand.hpp"
#include "fedcgs/gnb_head.hpp"
#include "fedcgs/metrics.hpp"
#include "fedcgs/partitioner.hpp"
#include "fedcgs/server_agg.hpp"
#include "oracles.hpp"

namespace fedcgs {
namespace {

TEST(Expand, IdentitySentinelReproducesInput) {
  const auto data = oracle::random_set(20, 5, 3, 1);
  const ExpansionConfig cfg{5, 5, kIdentityProjectionSeed, Activation::none};
  EXPECT_EQ(expand(data, cfg), data);
}

TEST(Expand, ZeroRowWithReluIsZero) {
  LabeledFeatureSet data{Matrix(1, 4), {0}, 1};
  const auto out = expand(data, ExpansionConfig{4, 64, 3, Activation::relu});
  ASSERT_EQ(out.dim(), 64u);
  for (double v : out.row(0)) EXPECT_EQ(v, 0.0);
}

TEST(Expand, LabelsPassThroughAndActivationsApply) {
  const auto data = oracle::random_set(30, 3, 4, 2);
  const auto relu = expand(data, ExpansionConfig{3, 16, 5, Activation::relu});
  const auto tanh = expand(data, ExpansionConfig{3, 16, 5, Activation::tanh});
  const auto none = expand(data, ExpansionConfig{3, 16, 5, Activation::none});
  EXPECT_EQ(relu.labels, data.labels);
  for (std::size_t i = 0; i < none.features.flat().size(); ++i) {
    const double z = none.features.flat()[i];
    EXPECT_EQ(relu.features.flat()[i], z > 0 ? z : 0.0);
    EXPECT_DOUBLE_EQ(tanh.features.flat()[i], std::tanh(z));
  }
}

TEST(Expand, ProjectionIsSeedDeterministicAndScaled) {
  const ExpansionConfig cfg{16, 256, 99, Activation::relu};
  const auto p = projection_matrix(cfg);
  EXPECT_EQ(p, projection_matrix(cfg));
  // Entries are N(0, 1/d): the empirical variance over 4096 draws is close.
  double sum = 0.0;
  double sq = 0.0;
  for (double v : p.flat()) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(p.flat().size());
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0 / 16.0, 0.005);
  ExpansionConfig other = cfg;
  other.seed = 100;
  EXPECT_NE(p, projection_matrix(other));
}

// Two clients with disjoint data build the same projection: expanding the
// same probe row gives identical output.
TEST(Expand, ClientsShareTheProjection) {
  const ExpansionConfig cfg{6, 32, 1234, Activation::relu};
  const auto probe = oracle::random_set(1, 6, 1, 9);
  const auto client_a = expand(probe, cfg);
  const auto client_b = expand(probe, ExpansionConfig(cfg));
  EXPECT_EQ(client_a, client_b);
}

TEST(Expand, CommutesWithPartitioning) {
  const auto data = oracle::random_set(300, 4, 3, 3);
  const ExpansionConfig cfg{4, 24, 7, Activation::relu};
  const PartitionSpec spec{.num_clients = 6, .scheme = DirichletScheme{0.1}, .seed = 4};
  const auto expanded_then_split = partition(expand(data, cfg), spec);
  const auto split = partition(data, spec);
  for (std::size_t c = 0; c < split.size(); ++c)
    EXPECT_EQ(expand(split[c], cfg), expanded_then_split[c]) << "client " << c;
}

TEST(Expand, UploadScalesWithExpandedDimension) {
  const auto data = oracle::random_set(40, 4, 3, 4);
  const auto expanded = expand(data, ExpansionConfig{4, 48, 1, Activation::relu});
  const auto bytes = encode_upload(compute_client_stats(expanded));
  EXPECT_EQ((bytes.size() - kUploadHeaderBytes) / 8, count_upload(48, 3));
}

TEST(Expand, DimensionMismatchAndBadConfig) {
  const auto data = oracle::random_set(3, 4, 2, 5);
  EXPECT_THROW(expand(data, ExpansionConfig{5, 8, 1, Activation::relu}), DimensionMismatch);
  EXPECT_THROW(projection_matrix(ExpansionConfig{4, 0, 1, Activation::relu}), Error);
  EXPECT_THROW(parse_activation("sigmoid"), Error);
  EXPECT_EQ(parse_activation("tanh"), Activation::tanh);
}

TEST(Expand, XorBecomesSeparable) {
  const auto train = generate_xor(1000, 2.0, 0.5, 11);
  const auto test = generate_xor(1000, 2.0, 0.5, 12);
  const auto linear = evaluate(build_head(aggregate(compute_client_stats(train))), test);
  const ExpansionConfig cfg{2, 256, 5, Activation::relu};
  const auto expanded =
      evaluate(build_head(aggregate(compute_client_stats(expand(train, cfg)))), expand(test, cfg));
  EXPECT_GE(expanded - linear, 0.10) << "linear " << linear << " expanded " << expanded;
}

}  // namespace
}  // namespace fedcgs
