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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fedcgs/gnb_head.hpp"
#include "fedcgs/metrics.hpp"
#include "oracles.hpp"

namespace fedcgs {
namespace {

/// Global statistics with the given covariance, prototypes and priors.
GlobalStatistics make_global(const SymmetricMatrix& cov, const std::vector<Vector>& protos,
                             const std::vector<double>& priors) {
  GlobalStatistics g;
  const std::size_t d = cov.dim();
  const std::size_t c = protos.size();
  g.covariance = cov;
  g.prototypes = Matrix(c, d);
  g.class_sums = Matrix(c, d);
  g.present.assign(c, true);
  g.priors = priors;
  g.global_mean = Vector(d);
  g.class_counts.assign(c, 1);
  g.total_count = c;
  for (std::size_t j = 0; j < c; ++j)
    for (std::size_t k = 0; k < d; ++k) g.prototypes(j, k) = protos[j][k];
  return g;
}

oracle::Dense dense(const SymmetricMatrix& m) {
  oracle::Dense out(m.dim(), std::vector<double>(m.dim()));
  for (std::size_t r = 0; r < m.dim(); ++r)
    for (std::size_t c = 0; c < m.dim(); ++c) out[r][c] = m(r, c);
  return out;
}

TEST(BuildHead, IdentityCovarianceIsHandComputable) {
  const auto g = make_global(SymmetricMatrix::identity(2), {{1, 0}, {0, 1}}, {0.5, 0.5});
  const auto head = build_head(g, 0.0);
  EXPECT_EQ(head.ridge_used, 0.0);
  EXPECT_DOUBLE_EQ(head.weights(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(head.weights(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(head.weights(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(head.weights(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(head.bias[0], std::log(0.5) - 0.5);
  EXPECT_DOUBLE_EQ(head.bias[1], std::log(0.5) - 0.5);
}

TEST(BuildHead, EqualPrototypesAndPriorsTieEverywhere) {
  const auto cov = SymmetricMatrix::from_rows({{2, 0.5}, {0.5, 1}});
  const auto head = build_head(make_global(cov, {{1, -2}, {1, -2}}, {0.5, 0.5}));
  EXPECT_EQ(head.weights.row(0)[0], head.weights.row(1)[0]);
  EXPECT_EQ(head.weights.row(0)[1], head.weights.row(1)[1]);
  EXPECT_EQ(head.bias[0], head.bias[1]);
  const auto p = head_probabilities(head, Vector{3.0, 4.0}.span());
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
  EXPECT_EQ(predict(head, Vector{3.0, 4.0}.span()), 0u);  // tie -> lowest index
}

TEST(BuildHead, RidgeIsRelativeToAverageVariance) {
  const auto cov = SymmetricMatrix::from_rows({{2, 0}, {0, 4}});
  const auto head = build_head(make_global(cov, {{1, 1}}, {1.0}), 1e-3);
  EXPECT_DOUBLE_EQ(head.ridge_used, 1e-3 * 3.0);
}

TEST(BuildHead, SingularCovarianceWithoutRidgeThrows) {
  const auto cov = SymmetricMatrix::from_rows({{1, 1}, {1, 1}});
  EXPECT_THROW(build_head(make_global(cov, {{1, 1}}, {1.0}), 0.0), SingularCovariance);
  EXPECT_NO_THROW(build_head(make_global(cov, {{1, 1}}, {1.0}), 1e-6));
  EXPECT_THROW(build_head(make_global(SymmetricMatrix(2), {{1, 1}}, {1.0})), SingularCovariance);
  EXPECT_THROW(build_head(make_global(cov, {{1, 1}}, {1.0}), -1.0), Error);
}

// softmax(W f + b) against the full Gaussian density ratio, with the ridge
// applied identically on both sides.
TEST(HeadProbabilities, MatchDensityRatio) {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> nd;
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    const std::size_t d = 8;
    const auto cov_dense = oracle::random_spd(d, 40 + trial);
    SymmetricMatrix cov(d);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = r; c < d; ++c) cov.set(r, c, cov_dense[r][c]);
    std::vector<Vector> protos(4, Vector(d));
    for (auto& p : protos)
      for (auto& x : p) x = nd(gen);
    const std::vector<double> priors{0.1, 0.2, 0.3, 0.4};
    const auto head = build_head(make_global(cov, protos, priors));

    auto reg = dense(cov);
    for (std::size_t k = 0; k < d; ++k) reg[k][k] += head.ridge_used;
    std::vector<std::vector<double>> means;
    for (const auto& p : protos) means.push_back(p.values());

    for (int t = 0; t < 100; ++t) {
      std::vector<double> f(d);
      for (auto& x : f) x = 2.0 * nd(gen);
      const auto expected = oracle::gaussian_posterior(f, means, priors, reg);
      const auto got = head_probabilities(head, f);
      double total = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_NEAR(got[j], expected[j], 1e-10);
        EXPECT_GT(got[j], 0.0);
        total += got[j];
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
      const auto arg_expected = static_cast<std::uint32_t>(
          std::max_element(expected.begin(), expected.end()) - expected.begin());
      EXPECT_EQ(predict(head, f), arg_expected);
    }
  }
}

TEST(HeadProbabilities, AbsentClassesAreExcluded) {
  auto g = make_global(SymmetricMatrix::identity(2), {{1, 0}, {0, 0}, {0, 1}}, {0.5, 0.0, 0.5});
  g.present[1] = false;
  const auto head = build_head(g);
  EXPECT_FALSE(head.present[1]);
  const auto p = head_probabilities(head, Vector{0.0, 0.0}.span());
  EXPECT_EQ(p[1], 0.0);
  EXPECT_NEAR(p[0] + p[2], 1.0, 1e-12);
  for (const auto& f : {Vector{0, 0}, Vector{-5, -5}, Vector{9, 0}})
    EXPECT_NE(predict(head, f.span()), 1u);
}

TEST(HeadProbabilities, SinglePresentClassGetsEverything) {
  auto g = make_global(SymmetricMatrix::identity(2), {{1, 0}, {0, 1}}, {1.0, 0.0});
  g.present[1] = false;
  const auto p = head_probabilities(build_head(g), Vector{-100.0, 100.0}.span());
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[1], 0.0);
}

TEST(HeadProbabilities, LargeLogitsStayFinite) {
  const auto g = make_global(SymmetricMatrix::identity(2), {{1, 0}, {0, 1}}, {0.5, 0.5});
  const auto p = head_probabilities(build_head(g), Vector{1e6, -1e6}.span());
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[1], 0.0);
}

TEST(HeadProbabilities, DimensionMismatch) {
  const auto g = make_global(SymmetricMatrix::identity(2), {{1, 0}}, {1.0});
  EXPECT_THROW(head_probabilities(build_head(g), Vector{1, 2, 3}.span()), DimensionMismatch);
}

}  // namespace
}  // namespace fedcgs
