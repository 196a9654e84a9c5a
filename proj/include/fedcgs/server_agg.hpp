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

#include <cstdint>
#include <vector>

#include "fedcgs/client_stats.hpp"
#include "fedcgs/dataio.hpp"
#include "fedcgs/errors.hpp"
#include "fedcgs/numcore.hpp"

namespace fedcgs {

/// Global feature statistics reconstructed by the server.
struct GlobalStatistics {
  Matrix class_sums;                        // C x d, A^j
  std::vector<std::uint64_t> class_counts;  // N^j
  std::uint64_t total_count = 0;            // N
  Matrix prototypes;                        // C x d, mu^j (zero row when absent)
  std::vector<bool> present;                // N^j > 0
  Vector global_mean;                       // mu
  SymmetricMatrix covariance;               // Sigma, N - 1 normalization
  std::vector<double> priors;               // pi_j = N^j / N

  std::size_t dim() const { return global_mean.dim(); }
  std::size_t num_classes() const { return class_counts.size(); }

  std::size_t present_count() const {
    std::size_t k = 0;
    for (bool p : present) k += p ? 1 : 0;
    return k;
  }
};

namespace detail {

inline void fill_class_terms(GlobalStatistics& g) {
  const std::size_t c = g.class_counts.size();
  const std::size_t d = g.class_sums.cols();
  g.prototypes = Matrix(c, d);
  g.present.assign(c, false);
  g.priors.assign(c, 0.0);
  for (std::size_t j = 0; j < c; ++j) {
    g.priors[j] = static_cast<double>(g.class_counts[j]) / static_cast<double>(g.total_count);
    if (g.class_counts[j] == 0) continue;
    g.present[j] = true;
    const double inv = 1.0 / static_cast<double>(g.class_counts[j]);
    const auto src = g.class_sums.row(j);
    auto dst = g.prototypes.row(j);
    for (std::size_t k = 0; k < d; ++k) dst[k] = src[k] * inv;
  }
}

}  // namespace detail

/// Server-side reconstruction from the summed uploads:
///   mu^j = A^j / N^j,  mu = A / N,
///   Sigma = (B - mu^T A - A^T mu + N mu^T mu) / (N - 1).
/// Classes with N^j = 0 are marked absent.
inline GlobalStatistics aggregate(const ClientStatistics& sum) {
  const std::uint64_t n = sum.total_count();
  if (n < 2)
    throw DegenerateCovariance("covariance needs at least two samples, got " + std::to_string(n));
  const std::size_t d = sum.dim();

  GlobalStatistics g;
  g.class_sums = sum.class_sums;
  g.class_counts = sum.class_counts;
  g.total_count = n;
  detail::fill_class_terms(g);

  const Vector a = sum.feature_sum();
  const double nd = static_cast<double>(n);
  g.global_mean = a;
  g.global_mean *= 1.0 / nd;
  const Vector& mu = g.global_mean;

  g.covariance = SymmetricMatrix(d);
  auto cov = g.covariance.raw();
  const double scale = 1.0 / (nd - 1.0);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double cross = mu[r] * a[c] + a[r] * mu[c];
      cov[r * d + c] = (sum.second_moment(r, c) - cross + nd * mu[r] * mu[c]) * scale;
    }
  }
  g.covariance.symmetrize();
  return g;
}

/// Direct two-pass statistics over pooled data; the ground truth that the
/// federated reconstruction is checked against.
inline GlobalStatistics centralized_reference(const LabeledFeatureSet& data) {
  const std::size_t n = data.size();
  if (n < 2)
    throw DegenerateCovariance("covariance needs at least two samples, got " + std::to_string(n));
  const std::size_t d = data.dim();

  GlobalStatistics g;
  g.class_sums = Matrix(data.num_classes, d);
  g.class_counts.assign(data.num_classes, 0);
  g.total_count = n;
  g.global_mean = Vector(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = data.row(i);
    auto s = g.class_sums.row(data.labels[i]);
    for (std::size_t k = 0; k < d; ++k) s[k] += f[k];
    g.global_mean += f;
    ++g.class_counts[data.labels[i]];
  }
  g.global_mean *= 1.0 / static_cast<double>(n);
  detail::fill_class_terms(g);

  g.covariance = SymmetricMatrix(d);
  Vector centered(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = data.row(i);
    for (std::size_t k = 0; k < d; ++k) centered[k] = f[k] - g.global_mean[k];
    g.covariance.add_outer(centered.span());
  }
  g.covariance *= 1.0 / static_cast<double>(n - 1);
  return g;
}

}  // namespace fedcgs
