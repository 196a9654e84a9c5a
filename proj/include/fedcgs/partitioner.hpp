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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "fedcgs/dataio.hpp"
#include "fedcgs/errors.hpp"
#include "fedcgs/random.hpp"

namespace fedcgs {

/// Label-shift split: each class is spread over clients by proportions
/// drawn from Dir(alpha * 1_M).
struct DirichletScheme {
  double alpha = 0.5;
};

/// Seeded shuffle, then near-equal contiguous shares.
struct UniformScheme {};

/// Explicit sample -> client map (e.g. one client per source domain).
struct AssignmentScheme {
  std::vector<std::uint32_t> client_of_sample;
};

using PartitionScheme = std::variant<DirichletScheme, UniformScheme, AssignmentScheme>;

struct PartitionSpec {
  std::uint32_t num_clients = 10;
  PartitionScheme scheme = DirichletScheme{};
  std::uint64_t seed = 0;
};

namespace detail {

/// Splits `total` items by `proportions` using largest-remainder rounding.
/// Ties on the fractional part go to the lower client id.
inline std::vector<std::size_t> largest_remainder(std::size_t total,
                                                  const std::vector<double>& proportions) {
  const std::size_t m = proportions.size();
  std::vector<std::size_t> counts(m);
  std::vector<double> remainder(m);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double exact = static_cast<double>(total) * proportions[i];
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  // Floating-point sums can overshoot by one in pathological cases.
  while (assigned > total) {
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % m, ++assigned) ++counts[order[k]];
  return counts;
}

}  // namespace detail

/// Sample indices owned by each client. Every index in [0, N) appears in
/// exactly one list; each list is sorted ascending. Clients may be empty.
inline std::vector<std::vector<std::size_t>> partition_indices(const LabeledFeatureSet& data,
                                                               const PartitionSpec& spec) {
  const std::size_t n = data.size();
  const std::size_t m = spec.num_clients;
  if (m == 0) throw PartitionError("number of clients must be positive");
  if (m > n)
    throw PartitionError("cannot split " + std::to_string(n) + " samples over " +
                         std::to_string(m) + " clients");

  std::vector<std::vector<std::size_t>> owned(m);
  Rng rng(spec.seed);

  std::visit(
      [&](const auto& scheme) {
        using S = std::decay_t<decltype(scheme)>;
        if constexpr (std::is_same_v<S, DirichletScheme>) {
          if (!(scheme.alpha > 0.0) || !std::isfinite(scheme.alpha))
            throw PartitionError("Dirichlet concentration must be positive");
          std::vector<std::vector<std::size_t>> by_class(data.num_classes);
          for (std::size_t i = 0; i < n; ++i) by_class[data.labels[i]].push_back(i);
          for (auto& members : by_class) {
            rng.shuffle(std::span<std::size_t>(members));
            const auto proportions = rng.dirichlet(scheme.alpha, m);
            const auto counts = detail::largest_remainder(members.size(), proportions);
            std::size_t next = 0;
            for (std::size_t c = 0; c < m; ++c)
              for (std::size_t k = 0; k < counts[c]; ++k) owned[c].push_back(members[next++]);
          }
        } else if constexpr (std::is_same_v<S, UniformScheme>) {
          std::vector<std::size_t> order(n);
          std::iota(order.begin(), order.end(), 0);
          rng.shuffle(std::span<std::size_t>(order));
          const std::size_t base = n / m;
          const std::size_t extra = n % m;
          std::size_t next = 0;
          for (std::size_t c = 0; c < m; ++c) {
            const std::size_t share = base + (c < extra ? 1 : 0);
            owned[c].assign(order.begin() + static_cast<std::ptrdiff_t>(next),
                            order.begin() + static_cast<std::ptrdiff_t>(next + share));
            next += share;
          }
        } else {
          if (scheme.client_of_sample.size() != n)
            throw PartitionError("assignment map must cover every sample exactly once");
          for (std::size_t i = 0; i < n; ++i) {
            const auto c = scheme.client_of_sample[i];
            if (c >= m) throw PartitionError("assignment names client " + std::to_string(c));
            owned[c].push_back(i);
          }
        }
      },
      spec.scheme);

  for (auto& list : owned) std::sort(list.begin(), list.end());
  return owned;
}

/// Disjoint client datasets whose union is `data`.
inline std::vector<LabeledFeatureSet> partition(const LabeledFeatureSet& data,
                                                const PartitionSpec& spec) {
  const auto owned = partition_indices(data, spec);
  std::vector<LabeledFeatureSet> clients;
  clients.reserve(owned.size());
  for (const auto& list : owned) clients.push_back(subset(data, list));
  return clients;
}

}  // namespace fedcgs
