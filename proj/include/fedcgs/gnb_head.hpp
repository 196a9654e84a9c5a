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
#include <limits>
#include <optional>
#include <string>
#include <span>
#include <vector>

#include "fedcgs/errors.hpp"
#include "fedcgs/numcore.hpp"
#include "fedcgs/server_agg.hpp"

namespace fedcgs {

inline constexpr double kDefaultRidgeScale = 1e-6;

/// Training-free linear classifier: logit_j = w_j . f + b_j.
struct LinearHead {
  Matrix weights;             // C x d
  std::vector<double> bias;   // C
  std::vector<bool> present;  // absent classes never win the argmax
  double ridge_used = 0.0;    // epsilon added to the covariance diagonal

  std::size_t dim() const { return weights.cols(); }
  std::size_t num_classes() const { return bias.size(); }
};

/// Shared-covariance Gaussian head:
///   w_j = Sigma_eps^{-1} mu^j
///   b_j = log pi_j - 1/2 (mu^j)^T Sigma_eps^{-1} mu^j
/// with Sigma_eps = Sigma + eps I and eps = ridge_scale * trace(Sigma) / d.
/// One Cholesky factorization serves every class; the quadratic term reuses
/// w_j instead of a second solve.
inline LinearHead build_head(const GlobalStatistics& g, double ridge_scale = kDefaultRidgeScale) {
  if (!(ridge_scale >= 0.0) || !std::isfinite(ridge_scale))
    throw Error("ridge_scale must be a finite non-negative number");
  const std::size_t d = g.dim();
  const std::size_t c = g.num_classes();

  LinearHead head;
  head.ridge_used = ridge_scale * g.covariance.trace() / static_cast<double>(d);
  SymmetricMatrix regularized = g.covariance;
  for (std::size_t k = 0; k < d; ++k)
    regularized.set(k, k, regularized(k, k) + head.ridge_used);

  std::optional<Cholesky> factor;
  try {
    factor.emplace(regularized);
  } catch (const NotPositiveDefinite& e) {
    throw SingularCovariance(std::string("covariance is singular after ridge: ") + e.what());
  }

  head.weights = Matrix(c, d);
  head.bias.assign(c, 0.0);
  head.present = g.present;
  for (std::size_t j = 0; j < c; ++j) {
    if (!g.present[j]) continue;
    const auto mu = g.prototypes.row(j);
    const Vector w = factor->solve(mu);
    std::copy(w.begin(), w.end(), head.weights.row(j).begin());
    head.bias[j] = std::log(g.priors[j]) - 0.5 * dot(mu, w.span());
  }
  for (double v : head.weights.flat())
    if (!std::isfinite(v)) throw SingularCovariance("head weights are not finite");
  return head;
}

/// Logits for every class; absent classes get -infinity.
inline std::vector<double> head_logits(const LinearHead& head, std::span<const double> f) {
  detail::require_dim(f.size(), head.dim(), "head_logits");
  std::vector<double> logits(head.num_classes(), -std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < head.num_classes(); ++j)
    if (head.present[j]) logits[j] = dot(head.weights.row(j), f) + head.bias[j];
  return logits;
}

/// Softmax over present classes (max-logit shifted). Absent classes get 0.
inline std::vector<double> head_probabilities(const LinearHead& head, std::span<const double> f) {
  auto logits = head_logits(head, f);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < logits.size(); ++j)
    if (head.present[j]) peak = std::max(peak, logits[j]);
  double total = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    logits[j] = head.present[j] ? std::exp(logits[j] - peak) : 0.0;
    total += logits[j];
  }
  for (auto& p : logits) p /= total;
  return logits;
}

/// Argmax over present classes; ties go to the lowest class index.
inline std::uint32_t predict(const LinearHead& head, std::span<const double> f) {
  const auto logits = head_logits(head, f);
  std::uint32_t best = 0;
  bool found = false;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (!head.present[j]) continue;
    if (!found || logits[j] > logits[best]) {
      best = static_cast<std::uint32_t>(j);
      found = true;
    }
  }
  if (!found) throw Error("head has no present classes");
  return best;
}

}  // namespace fedcgs
