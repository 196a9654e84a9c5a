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

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "json.hpp"

#include "fedcgs/client_stats.hpp"
#include "fedcgs/dataio.hpp"
#include "fedcgs/feature_expand.hpp"
#include "fedcgs/gnb_head.hpp"
#include "fedcgs/metrics.hpp"
#include "fedcgs/partitioner.hpp"
#include "fedcgs/secure_agg.hpp"
#include "fedcgs/server_agg.hpp"

namespace fedcgs {

enum class SecureAggMode { off, counts, full };

inline SecureAggMode parse_secure_mode(std::string_view name) {
  if (name == "off") return SecureAggMode::off;
  if (name == "counts") return SecureAggMode::counts;
  if (name == "full") return SecureAggMode::full;
  throw Error("unknown secure aggregation mode '" + std::string(name) +
              "' (expected off, counts or full)");
}

inline std::string_view to_string(SecureAggMode m) {
  switch (m) {
    case SecureAggMode::off: return "off";
    case SecureAggMode::counts: return "counts";
    case SecureAggMode::full: return "full";
  }
  return "off";
}

/// Sums the client uploads the way the server sees them. With secure
/// aggregation the masked fields are recovered only as a total; in counts
/// mode the class sums and second moments are folded in the clear.
inline ClientStatistics aggregate_uploads(std::span<const ClientStatistics> uploads,
                                          SecureAggMode mode, std::uint64_t session_seed,
                                          FixedPointCodec codec = {}) {
  if (uploads.empty()) throw Error("no client uploads");
  if (mode == SecureAggMode::off) return merge_all(uploads);

  std::vector<std::uint32_t> ids(uploads.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::uint32_t>(i);
  const auto scope =
      mode == SecureAggMode::full ? SecureScope::full_statistics : SecureScope::counts_only;
  const auto session = SecureSession::setup(ids, uploads[0].dim(), uploads[0].num_classes(), scope,
                                            session_seed, codec);
  std::vector<MaskedUpload> masked;
  masked.reserve(uploads.size());
  for (std::size_t i = 0; i < uploads.size(); ++i)
    masked.push_back(encode_masked(uploads[i], session, ids[i]));
  auto secure_sum = aggregate_masked(masked, session);
  if (mode == SecureAggMode::full) return secure_sum;

  auto clear = merge_all(uploads);
  clear.class_counts = std::move(secure_sum.class_counts);
  return clear;
}

struct SimulationConfig {
  PartitionSpec partition;
  SecureAggMode secure = SecureAggMode::off;
  std::uint64_t secure_seed = 0x5EC0DEULL;
  std::optional<ExpansionConfig> expansion;
  double ridge_scale = kDefaultRidgeScale;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"num_clients", partition.num_clients},
                        {"seed", partition.seed},
                        {"secure_agg", std::string(to_string(secure))},
                        {"ridge_scale", ridge_scale}};
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, DirichletScheme>) {
            j["scheme"] = "dirichlet";
            j["alpha"] = s.alpha;
          } else if constexpr (std::is_same_v<S, UniformScheme>) {
            j["scheme"] = "uniform";
          } else {
            j["scheme"] = "assignment";
          }
        },
        partition.scheme);
    if (expansion) {
      j["expand_dim"] = expansion->output_dim;
      j["expand_seed"] = expansion->seed;
      j["expand_activation"] = std::string(to_string(expansion->activation));
    }
    return j;
  }
};

struct SimulationResult {
  RunReport report;
  GlobalStatistics global;
  GlobalStatistics reference;
  LinearHead head;
  std::vector<std::uint32_t> predictions;
};

/// One-shot round end to end: (expand) -> partition -> client statistics ->
/// (secure) aggregation -> global statistics -> head -> evaluation, with the
/// deviation against centrally computed statistics of the same training data.
inline SimulationResult simulate(const LabeledFeatureSet& train, const LabeledFeatureSet& test,
                                 const SimulationConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  detail::require_dim(test.dim(), train.dim(), "simulate (test dim)");

  const LabeledFeatureSet* train_view = &train;
  const LabeledFeatureSet* test_view = &test;
  LabeledFeatureSet train_expanded;
  LabeledFeatureSet test_expanded;
  if (cfg.expansion) {
    // Every client builds the same projection from the shared seed.
    const Matrix projection = projection_matrix(*cfg.expansion);
    train_expanded = expand(train, projection, cfg.expansion->activation);
    test_expanded = expand(test, projection, cfg.expansion->activation);
    train_view = &train_expanded;
    test_view = &test_expanded;
  }

  const auto clients = partition(*train_view, cfg.partition);
  std::vector<ClientStatistics> uploads;
  uploads.reserve(clients.size());
  for (const auto& c : clients) uploads.push_back(compute_client_stats(c));

  SimulationResult result;
  result.global = aggregate(aggregate_uploads(uploads, cfg.secure, cfg.secure_seed));
  result.reference = centralized_reference(*train_view);
  result.head = build_head(result.global, cfg.ridge_scale);
  result.predictions = predictions(result.head, *test_view);

  auto& report = result.report;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < result.predictions.size(); ++i)
    hits += result.predictions[i] == test_view->labels[i];
  report.accuracy =
      test_view->size() == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(test_view->size());
  const auto dev = deviation(result.global, result.reference);
  report.delta_mu = dev.delta_mu;
  report.delta_sigma = dev.delta_sigma;
  const std::size_t d = train_view->dim();
  const std::size_t c = train_view->num_classes;
  report.params_per_client = count_upload(d, c);
  report.params_total = report.params_per_client * clients.size();
  report.bytes_per_client = upload_bytes(d, c);
  report.bytes_total = report.bytes_per_client * clients.size();
  report.config = cfg.to_json();
  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace fedcgs
