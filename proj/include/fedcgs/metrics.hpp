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

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedcgs/client_stats.hpp"
#include "fedcgs/dataio.hpp"
#include "fedcgs/errors.hpp"
#include "fedcgs/gnb_head.hpp"
#include "fedcgs/numcore.hpp"
#include "fedcgs/server_agg.hpp"

namespace fedcgs {

struct Deviation {
  double delta_mu = 0.0;     // ||mu - mu_ref||_2
  double delta_sigma = 0.0;  // ||Sigma - Sigma_ref||_F
};

/// Distance between reconstructed and reference statistics. The covariance
/// term uses the Frobenius norm.
inline Deviation deviation(const GlobalStatistics& global, const GlobalStatistics& reference) {
  detail::require_dim(reference.dim(), global.dim(), "deviation");
  Deviation d;
  double s = 0.0;
  for (std::size_t k = 0; k < global.dim(); ++k) {
    const double diff = global.global_mean[k] - reference.global_mean[k];
    s += diff * diff;
  }
  d.delta_mu = std::sqrt(s);
  d.delta_sigma = frobenius_distance(global.covariance, reference.covariance);
  return d;
}

enum class UploadScope {
  full_statistics,  // counts, class sums and the dense second moment
  counts_only,      // class counts alone (the secure channel in counts mode)
};

/// Scalars a client uploads. Full statistics: (C + d) * d + C.
inline std::uint64_t count_upload(std::uint64_t dim, std::uint64_t num_classes,
                                  UploadScope scope = UploadScope::full_statistics) {
  switch (scope) {
    case UploadScope::full_statistics: return upload_scalar_count(dim, num_classes);
    case UploadScope::counts_only: return num_classes;
  }
  return 0;
}

/// Bytes of one encoded upload, header included.
inline std::uint64_t upload_bytes(std::uint64_t dim, std::uint64_t num_classes) {
  return kUploadHeaderBytes + 8 * upload_scalar_count(dim, num_classes);
}

inline std::vector<std::uint32_t> predictions(const LinearHead& head, const LabeledFeatureSet& test) {
  detail::require_dim(test.dim(), head.dim(), "evaluate");
  std::vector<std::uint32_t> out(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) out[i] = predict(head, test.row(i));
  return out;
}

/// Fraction of rows whose argmax prediction equals the label. A label that
/// names an absent class can never be predicted.
inline double evaluate(const LinearHead& head, const LabeledFeatureSet& test) {
  if (test.size() == 0) throw Error("evaluate: empty test set");
  const auto pred = predictions(head, test);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == test.labels[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

/// One simulation run. Serialized with stable keys: accuracy, delta_mu,
/// delta_sigma, params_per_client, bytes_per_client, config (plus totals and
/// elapsed time).
struct RunReport {
  double accuracy = 0.0;
  double delta_mu = 0.0;
  double delta_sigma = 0.0;
  std::uint64_t params_per_client = 0;
  std::uint64_t params_total = 0;
  std::uint64_t bytes_per_client = 0;
  std::uint64_t bytes_total = 0;
  double elapsed_seconds = 0.0;
  nlohmann::json config = nlohmann::json::object();

  nlohmann::json to_json() const {
    return {{"accuracy", accuracy},
            {"delta_mu", delta_mu},
            {"delta_sigma", delta_sigma},
            {"params_per_client", params_per_client},
            {"params_total", params_total},
            {"bytes_per_client", bytes_per_client},
            {"bytes_total", bytes_total},
            {"elapsed_seconds", elapsed_seconds},
            {"config", config}};
  }
};

}  // namespace fedcgs
