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
#include <vector>

#include "fedcgs/partitioner.hpp"
#include "oracles.hpp"

namespace fedcgs {
namespace {

TEST(Partition, UniformSingleClientIsIdentity) {
  const auto data = oracle::random_set(37, 3, 4, 1);
  const auto parts = partition(data, {.num_clients = 1, .scheme = UniformScheme{}, .seed = 9});
  ASSERT_EQ(parts.size(), 1u);
  EXPECT_EQ(parts[0], data);
}

TEST(Partition, DirichletIsDeterministic) {
  const auto data = oracle::random_set(500, 2, 5, 2);
  const PartitionSpec spec{.num_clients = 10, .scheme = DirichletScheme{0.5}, .seed = 1234};
  EXPECT_EQ(partition_indices(data, spec), partition_indices(data, spec));
  PartitionSpec other = spec;
  other.seed = 1235;
  EXPECT_NE(partition_indices(data, spec), partition_indices(data, other));
}

TEST(Partition, DisjointAndExhaustiveAcrossSettings) {
  const auto data = oracle::random_set(1000, 3, 10, 3);
  for (double alpha : {0.05, 0.1, 0.5}) {
    for (std::uint32_t m : {10u, 50u}) {
      const PartitionSpec spec{.num_clients = m, .scheme = DirichletScheme{alpha}, .seed = 77};
      const auto owned = partition_indices(data, spec);
      ASSERT_EQ(owned.size(), m);
      std::vector<std::size_t> all;
      for (const auto& list : owned) {
        EXPECT_TRUE(std::is_sorted(list.begin(), list.end()));
        all.insert(all.end(), list.begin(), list.end());
      }
      std::sort(all.begin(), all.end());
      ASSERT_EQ(all.size(), data.size()) << "alpha=" << alpha << " M=" << m;
      for (std::size_t i = 0; i < all.size(); ++i) ASSERT_EQ(all[i], i);

      // Rebuilding from the client sets reproduces every (row, label) pair.
      const auto clients = partition(data, spec);
      std::size_t n = 0;
      for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t k = 0; k < owned[c].size(); ++k) {
          const auto src = owned[c][k];
          EXPECT_EQ(clients[c].labels[k], data.labels[src]);
          for (std::size_t f = 0; f < data.dim(); ++f)
            EXPECT_EQ(clients[c].features(k, f), data.features(src, f));
        }
        n += clients[c].size();
      }
      EXPECT_EQ(n, data.size());
    }
  }
}

TEST(Partition, SmallAlphaConcentratesClasses) {
  const auto data = oracle::random_set(5000, 1, 10, 4);
  const auto clients =
      partition(data, {.num_clients = 10, .scheme = DirichletScheme{0.05}, .seed = 5});
  // At alpha = 0.05 most of a client's samples come from one or two classes.
  std::size_t dominated = 0;
  std::size_t non_empty = 0;
  for (const auto& c : clients) {
    if (c.size() == 0) continue;
    ++non_empty;
    const auto h = c.class_histogram();
    if (*std::max_element(h.begin(), h.end()) * 2 > c.size()) ++dominated;
  }
  EXPECT_GE(dominated * 2, non_empty);
}

TEST(Partition, UniformSharesDifferByAtMostOne) {
  const auto data = oracle::random_set(103, 2, 3, 5);
  const auto owned = partition_indices(data, {.num_clients = 10, .scheme = UniformScheme{}, .seed = 1});
  for (const auto& list : owned) {
    EXPECT_GE(list.size(), 10u);
    EXPECT_LE(list.size(), 11u);
  }
}

TEST(Partition, ExplicitAssignment) {
  const auto data = oracle::random_set(6, 2, 2, 6);
  const PartitionSpec spec{.num_clients = 3, .scheme = AssignmentScheme{{2, 0, 2, 1, 0, 2}}};
  const auto owned = partition_indices(data, spec);
  EXPECT_EQ(owned[0], (std::vector<std::size_t>{1, 4}));
  EXPECT_EQ(owned[1], (std::vector<std::size_t>{3}));
  EXPECT_EQ(owned[2], (std::vector<std::size_t>{0, 2, 5}));

  EXPECT_THROW(partition_indices(data, {.num_clients = 3, .scheme = AssignmentScheme{{0, 1}}}),
               PartitionError);
  EXPECT_THROW(
      partition_indices(data, {.num_clients = 3, .scheme = AssignmentScheme{{0, 1, 2, 3, 0, 0}}}),
      PartitionError);
}

TEST(Partition, MoreClientsThanSamplesIsError) {
  const auto data = oracle::random_set(5, 2, 2, 7);
  EXPECT_THROW(partition(data, {.num_clients = 6}), PartitionError);
  EXPECT_THROW(partition(data, {.num_clients = 0}), PartitionError);
  EXPECT_THROW(partition(data, {.num_clients = 2, .scheme = DirichletScheme{0.0}}), PartitionError);
}

TEST(LargestRemainder, TiesGoToLowerClientId) {
  // 3 items over four equal shares: remainders tie, so clients 0..2 get one.
  EXPECT_EQ(detail::largest_remainder(3, {0.25, 0.25, 0.25, 0.25}),
            (std::vector<std::size_t>{1, 1, 1, 0}));
  EXPECT_EQ(detail::largest_remainder(10, {0.55, 0.45}), (std::vector<std::size_t>{6, 4}));
  EXPECT_EQ(detail::largest_remainder(0, {0.5, 0.5}), (std::vector<std::size_t>{0, 0}));
}

TEST(Dirichlet, ProportionsFormASimplex) {
  Rng rng(42);
  for (double alpha : {0.01, 0.05, 0.5, 5.0}) {
    for (int t = 0; t < 50; ++t) {
      const auto p = rng.dirichlet(alpha, 7);
      double total = 0.0;
      for (double v : p) {
        EXPECT_GE(v, 0.0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Dirichlet, MeanMatchesSymmetricExpectation) {
  Rng rng(43);
  std::vector<double> mean(4, 0.0);
  constexpr int kDraws = 20000;
  for (int t = 0; t < kDraws; ++t) {
    const auto p = rng.dirichlet(0.5, 4);
    for (std::size_t i = 0; i < 4; ++i) mean[i] += p[i] / kDraws;
  }
  for (double m : mean) EXPECT_NEAR(m, 0.25, 0.01);
}

}  // namespace
}  // namespace fedcgs
