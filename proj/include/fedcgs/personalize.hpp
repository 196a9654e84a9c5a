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
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedcgs/dataio.hpp"
#include "fedcgs/errors.hpp"
#include "fedcgs/gnb_head.hpp"
#include "fedcgs/numcore.hpp"
#include "fedcgs/random.hpp"
#include "fedcgs/server_agg.hpp"

namespace fedcgs {

/// x -> relu(x W1 + b1) -> f = h W2 + b2 (feature map) -> f W3 + b3 (logits).
/// The same struct holds gradients.
struct MlpModel {
  Matrix w1;  // d_in x h
  Vector b1;  // h
  Matrix w2;  // h x d_f
  Vector b2;  // d_f
  Matrix w3;  // d_f x C
  Vector b3;  // C

  std::size_t input_dim() const { return w1.rows(); }
  std::size_t hidden_dim() const { return w1.cols(); }
  std::size_t feature_dim() const { return w2.cols(); }
  std::size_t num_classes() const { return w3.cols(); }

  static MlpModel zeros_like(const MlpModel& m) {
    return {Matrix(m.w1.rows(), m.w1.cols()), Vector(m.b1.dim()),
            Matrix(m.w2.rows(), m.w2.cols()), Vector(m.b2.dim()),
            Matrix(m.w3.rows(), m.w3.cols()), Vector(m.b3.dim())};
  }

  /// Every parameter tensor, in a fixed order.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn(w1.flat());
    fn(b1.span());
    fn(w2.flat());
    fn(b2.span());
    fn(w3.flat());
    fn(b3.span());
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    fn(w1.flat());
    fn(b1.span());
    fn(w2.flat());
    fn(b2.span());
    fn(w3.flat());
    fn(b3.span());
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](auto t) { n += t.size(); });
    return n;
  }

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

/// Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and
/// biases of each layer.
inline MlpModel init_mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t feature_dim,
                         std::size_t num_classes, std::uint64_t seed) {
  if (input_dim == 0 || hidden_dim == 0 || feature_dim == 0 || num_classes == 0)
    throw Error("model dimensions must be positive");
  MlpModel m{Matrix(input_dim, hidden_dim), Vector(hidden_dim), Matrix(hidden_dim, feature_dim),
             Vector(feature_dim),           Matrix(feature_dim, num_classes), Vector(num_classes)};
  Rng rng(seed);
  auto fill = [&](std::span<double> t, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t) v = (2.0 * rng.uniform() - 1.0) * bound;
  };
  fill(m.w1.flat(), input_dim);
  fill(m.b1.span(), input_dim);
  fill(m.w2.flat(), hidden_dim);
  fill(m.b2.span(), hidden_dim);
  fill(m.w3.flat(), feature_dim);
  fill(m.b3.span(), feature_dim);
  return m;
}

/// Fixed global prototypes in the model's feature space. Classes marked
/// absent contribute nothing to the regularizer.
struct PrototypeSet {
  Matrix means;  // C x d_f
  std::vector<bool> present;

  static PrototypeSet from_global(const GlobalStatistics& g) { return {g.prototypes, g.present}; }
};

namespace detail {

struct ForwardCache {
  std::vector<double> pre_hidden;  // z1
  std::vector<double> hidden;      // relu(z1)
  std::vector<double> feature;     // f
  std::vector<double> logits;
};

inline void affine(std::span<const double> x, const Matrix& w, std::span<const double> b,
                   std::vector<double>& out) {
  out.assign(b.begin(), b.end());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xk = x[k];
    const auto row = w.row(k);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += xk * row[c];
  }
}

inline void forward(const MlpModel& m, std::span<const double> x, ForwardCache& cache) {
  affine(x, m.w1, m.b1.span(), cache.pre_hidden);
  cache.hidden.resize(cache.pre_hidden.size());
  for (std::size_t k = 0; k < cache.hidden.size(); ++k)
    cache.hidden[k] = cache.pre_hidden[k] > 0.0 ? cache.pre_hidden[k] : 0.0;
  affine(cache.hidden, m.w2, m.b2.span(), cache.feature);
  affine(cache.feature, m.w3, m.b3.span(), cache.logits);
}

/// -log softmax(logits)[label]; also writes softmax into `probs`.
inline double cross_entropy(std::span<const double> logits, std::uint32_t label,
                            std::vector<double>& probs) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  probs.resize(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) {
    probs[c] = std::exp(logits[c] - peak);
    total += probs[c];
  }
  for (auto& p : probs) p /= total;
  return -(logits[label] - peak - std::log(total));
}

inline void check_shapes(const MlpModel& m, const LabeledFeatureSet& data,
                         const PrototypeSet& protos) {
  require_dim(data.dim(), m.input_dim(), "personalize (input dim)");
  require_dim(protos.means.cols(), m.feature_dim(), "personalize (prototype dim)");
  require_dim(protos.means.rows(), m.num_classes(), "personalize (prototype count)");
  require_dim(protos.present.size(), m.num_classes(), "personalize (prototype mask)");
  require_dim(data.num_classes, m.num_classes(), "personalize (class count)");
}

}  // namespace detail

/// Local feature map f(x; theta) for one sample.
inline std::vector<double> feature_map(const MlpModel& m, std::span<const double> x) {
  detail::require_dim(x.size(), m.input_dim(), "feature_map");
  detail::ForwardCache cache;
  detail::forward(m, x, cache);
  return cache.feature;
}

/// Feature-map output for every row, labels unchanged.
inline LabeledFeatureSet extract_features(const MlpModel& m, const LabeledFeatureSet& data) {
  detail::require_dim(data.dim(), m.input_dim(), "extract_features");
  LabeledFeatureSet out{Matrix(data.size(), m.feature_dim()), data.labels, data.num_classes};
  detail::ForwardCache cache;
  for (std::size_t i = 0; i < data.size(); ++i) {
    detail::forward(m, data.row(i), cache);
    std::copy(cache.feature.begin(), cache.feature.end(), out.features.row(i).begin());
  }
  return out;
}

/// Feature-alignment penalty without the lambda factor:
///   R = sum_j (1 / N^j) sum_{x in D^j} ||f(x) - mu^j||^2
/// over classes with local samples and a present prototype.
inline double regularizer(const MlpModel& m, const LabeledFeatureSet& data,
                          const PrototypeSet& protos) {
  detail::check_shapes(m, data, protos);
  const auto counts = data.class_histogram();
  detail::ForwardCache cache;
  double r = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto y = data.labels[i];
    if (!protos.present[y]) continue;
    detail::forward(m, data.row(i), cache);
    const auto mu = protos.means.row(y);
    double sq = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
      const double diff = cache.feature[k] - mu[k];
      sq += diff * diff;
    }
    r += sq / static_cast<double>(counts[y]);
  }
  return r;
}

struct ObjectiveValue {
  double total = 0.0;          // cross_entropy + lambda * regularizer
  double cross_entropy = 0.0;  // mean over samples
  double regularizer = 0.0;
};

/// Objective over the rows listed in `rows` and its gradient. The
/// regularizer's per-class normalization uses class counts within `rows`.
inline ObjectiveValue objective_and_gradient(const MlpModel& m, const LabeledFeatureSet& data,
                                             std::span<const std::size_t> rows,
                                             const PrototypeSet& protos, double lambda,
                                             MlpModel* grad) {
  detail::check_shapes(m, data, protos);
  if (rows.empty()) throw Error("objective over an empty batch");
  std::vector<std::size_t> counts(m.num_classes(), 0);
  for (auto i : rows) ++counts[data.labels[i]];
  if (grad) *grad = MlpModel::zeros_like(m);

  const double inv_n = 1.0 / static_cast<double>(rows.size());
  const std::size_t h = m.hidden_dim();
  const std::size_t df = m.feature_dim();
  const std::size_t c = m.num_classes();
  detail::ForwardCache cache;
  std::vector<double> probs;
  std::vector<double> d_logits(c);
  std::vector<double> d_feature(df);
  std::vector<double> d_hidden(h);

  ObjectiveValue value;
  for (auto i : rows) {
    const auto x = data.row(i);
    const auto y = data.labels[i];
    detail::forward(m, x, cache);
    value.cross_entropy += detail::cross_entropy(cache.logits, y, probs) * inv_n;

    const bool aligned = protos.present[y];
    double reg_weight = 0.0;
    if (aligned) {
      reg_weight = 1.0 / static_cast<double>(counts[y]);
      const auto mu = protos.means.row(y);
      double sq = 0.0;
      for (std::size_t k = 0; k < df; ++k) {
        const double diff = cache.feature[k] - mu[k];
        sq += diff * diff;
      }
      value.regularizer += sq * reg_weight;
    }
    if (!grad) continue;

    for (std::size_t j = 0; j < c; ++j) d_logits[j] = (probs[j] - (j == y ? 1.0 : 0.0)) * inv_n;
    // Classifier layer.
    for (std::size_t k = 0; k < df; ++k) {
      auto g_row = grad->w3.row(k);
      const double fk = cache.feature[k];
      const auto w_row = m.w3.row(k);
      double back = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        g_row[j] += fk * d_logits[j];
        back += w_row[j] * d_logits[j];
      }
      d_feature[k] = back;
    }
    for (std::size_t j = 0; j < c; ++j) grad->b3[j] += d_logits[j];
    if (aligned) {
      const auto mu = protos.means.row(y);
      for (std::size_t k = 0; k < df; ++k)
        d_feature[k] += lambda * 2.0 * reg_weight * (cache.feature[k] - mu[k]);
    }
    // Feature layer.
    for (std::size_t k = 0; k < h; ++k) {
      auto g_row = grad->w2.row(k);
      const double hk = cache.hidden[k];
      const auto w_row = m.w2.row(k);
      double back = 0.0;
      for (std::size_t j = 0; j < df; ++j) {
        g_row[j] += hk * d_feature[j];
        back += w_row[j] * d_feature[j];
      }
      d_hidden[k] = cache.pre_hidden[k] > 0.0 ? back : 0.0;
    }
    for (std::size_t j = 0; j < df; ++j) grad->b2[j] += d_feature[j];
    // Input layer.
    for (std::size_t k = 0; k < x.size(); ++k) {
      auto g_row = grad->w1.row(k);
      const double xk = x[k];
      for (std::size_t j = 0; j < h; ++j) g_row[j] += xk * d_hidden[j];
    }
    for (std::size_t j = 0; j < h; ++j) grad->b1[j] += d_hidden[j];
  }
  value.total = value.cross_entropy + lambda * value.regularizer;
  return value;
}

/// Objective over the whole dataset.
inline ObjectiveValue objective(const MlpModel& m, const LabeledFeatureSet& data,
                                const PrototypeSet& protos, double lambda) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  return objective_and_gradient(m, data, rows, protos, lambda, nullptr);
}

inline std::uint32_t predict(const MlpModel& m, std::span<const double> x) {
  detail::require_dim(x.size(), m.input_dim(), "predict");
  detail::ForwardCache cache;
  detail::forward(m, x, cache);
  return static_cast<std::uint32_t>(
      std::max_element(cache.logits.begin(), cache.logits.end()) - cache.logits.begin());
}

inline double accuracy(const MlpModel& m, const LabeledFeatureSet& data) {
  if (data.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) hits += predict(m, data.row(i)) == data.labels[i];
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

/// Mean over locally present classes of ||mean_j f(x) - mu^j||^2.
inline double prototype_alignment_gap(const MlpModel& m, const LabeledFeatureSet& data,
                                      const PrototypeSet& protos) {
  detail::check_shapes(m, data, protos);
  const auto features = extract_features(m, data);
  const auto counts = data.class_histogram();
  Matrix sums(m.num_classes(), m.feature_dim());
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto s = sums.row(data.labels[i]);
    const auto f = features.row(i);
    for (std::size_t k = 0; k < f.size(); ++k) s[k] += f[k];
  }
  double gap = 0.0;
  std::size_t classes = 0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] == 0 || !protos.present[j]) continue;
    const auto s = sums.row(j);
    const auto mu = protos.means.row(j);
    double sq = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double diff = s[k] / static_cast<double>(counts[j]) - mu[k];
      sq += diff * diff;
    }
    gap += sq;
    ++classes;
  }
  return classes == 0 ? 0.0 : gap / static_cast<double>(classes);
}

struct PersonalizeConfig {
  double lambda = 1.0;
  double learning_rate = 0.01;
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  double momentum = 0.5;

  void validate() const {
    if (!(lambda >= 0.0)) throw Error("lambda must be non-negative");
    if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
    if (batch_size == 0) throw Error("batch size must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("momentum must lie in [0, 1)");
  }
};

struct TrainResult {
  MlpModel model;
  std::vector<double> loss_trace;         // full-data objective after each epoch
  std::vector<double> regularizer_trace;  // R after each epoch (without lambda)
};

/// Mini-batch SGD with heavy-ball momentum (v = momentum v + g; theta -= lr v)
/// on cross-entropy + lambda R. Prototypes are never modified.
inline TrainResult local_train(MlpModel model, const LabeledFeatureSet& data,
                               const PrototypeSet& protos, const PersonalizeConfig& cfg) {
  cfg.validate();
  detail::check_shapes(model, data, protos);
  if (data.size() == 0) throw Error("local_train needs at least one sample");

  TrainResult result;
  MlpModel velocity = MlpModel::zeros_like(model);
  MlpModel grad;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const auto value = objective_and_gradient(model, data, batch, protos, cfg.lambda, &grad);
      if (!std::isfinite(value.total))
        throw TrainingDiverged("loss became non-finite in epoch " + std::to_string(epoch));

      std::vector<std::span<double>> params;
      std::vector<std::span<double>> grads;
      std::vector<std::span<double>> vels;
      model.for_each_tensor([&](std::span<double> t) { params.push_back(t); });
      grad.for_each_tensor([&](std::span<double> t) { grads.push_back(t); });
      velocity.for_each_tensor([&](std::span<double> t) { vels.push_back(t); });
      for (std::size_t t = 0; t < params.size(); ++t) {
        for (std::size_t k = 0; k < params[t].size(); ++k) {
          vels[t][k] = cfg.momentum * vels[t][k] + grads[t][k];
          params[t][k] -= cfg.learning_rate * vels[t][k];
        }
      }
    }
    const auto value = objective(model, data, protos, cfg.lambda);
    if (!std::isfinite(value.total))
      throw TrainingDiverged("loss became non-finite after epoch " + std::to_string(epoch));
    result.loss_trace.push_back(value.total);
    result.regularizer_trace.push_back(value.regularizer);
  }
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// Personalization split: every client gets the same number of samples, a
// fraction drawn from all classes and the rest from a per-client set of
// dominant classes. Clients never share samples.
// ---------------------------------------------------------------------------

struct PersonalSplitSpec {
  std::uint32_t num_clients = 10;
  std::size_t train_per_client = 100;
  std::size_t test_per_client = 50;
  double uniform_fraction = 0.2;
  std::uint32_t dominant_classes = 2;
  std::uint64_t seed = 0;
};

struct ClientSplit {
  std::vector<std::size_t> train;  // indices into the train pool
  std::vector<std::size_t> test;   // indices into the test pool
  std::vector<std::uint32_t> dominant;
};

namespace detail {

/// Draws `count` indices from `pool` (consumed) restricted to labels
/// accepted by `accept`.
inline std::vector<std::size_t> draw_from_pool(std::vector<std::size_t>& pool,
                                               const std::vector<std::uint32_t>& labels,
                                               const std::function<bool(std::uint32_t)>& accept,
                                               std::size_t count, Rng& rng) {
  std::vector<std::size_t> eligible_pos;
  for (std::size_t p = 0; p < pool.size(); ++p)
    if (accept(labels[pool[p]])) eligible_pos.push_back(p);
  if (eligible_pos.size() < count)
    throw PartitionError("not enough samples left for the personalization split");
  rng.shuffle(std::span<std::size_t>(eligible_pos));
  eligible_pos.resize(count);
  std::vector<std::size_t> taken;
  taken.reserve(count);
  for (auto p : eligible_pos) taken.push_back(pool[p]);
  std::sort(eligible_pos.begin(), eligible_pos.end());
  for (auto it = eligible_pos.rbegin(); it != eligible_pos.rend(); ++it)
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(*it));
  std::sort(taken.begin(), taken.end());
  return taken;
}

}  // namespace detail

inline std::vector<ClientSplit> personal_split(const LabeledFeatureSet& train_pool,
                                               const LabeledFeatureSet& test_pool,
                                               const PersonalSplitSpec& spec) {
  if (spec.num_clients == 0) throw PartitionError("number of clients must be positive");
  if (!(spec.uniform_fraction >= 0.0 && spec.uniform_fraction <= 1.0))
    throw PartitionError("uniform fraction must lie in [0, 1]");
  const std::uint32_t c = train_pool.num_classes;
  if (spec.dominant_classes == 0 || spec.dominant_classes > c)
    throw PartitionError("dominant class count must lie in [1, C]");

  Rng rng(spec.seed);
  std::vector<std::size_t> train_left(train_pool.size());
  std::vector<std::size_t> test_left(test_pool.size());
  std::iota(train_left.begin(), train_left.end(), 0);
  std::iota(test_left.begin(), test_left.end(), 0);
  const auto any = [](std::uint32_t) { return true; };

  std::vector<ClientSplit> out(spec.num_clients);
  for (auto& client : out) {
    std::vector<std::uint32_t> classes(c);
    std::iota(classes.begin(), classes.end(), 0);
    rng.shuffle(std::span<std::uint32_t>(classes));
    client.dominant.assign(classes.begin(), classes.begin() + spec.dominant_classes);
    std::sort(client.dominant.begin(), client.dominant.end());
    const auto is_dominant = [&](std::uint32_t y) {
      return std::binary_search(client.dominant.begin(), client.dominant.end(), y);
    };

    auto draw = [&](const LabeledFeatureSet& pool_set, std::vector<std::size_t>& pool,
                    std::size_t total) {
      const auto n_uniform = static_cast<std::size_t>(
          std::llround(spec.uniform_fraction * static_cast<double>(total)));
      auto picked = detail::draw_from_pool(pool, pool_set.labels, any, n_uniform, rng);
      auto rest = detail::draw_from_pool(pool, pool_set.labels, is_dominant, total - n_uniform, rng);
      picked.insert(picked.end(), rest.begin(), rest.end());
      std::sort(picked.begin(), picked.end());
      return picked;
    };
    client.train = draw(train_pool, train_left, spec.train_per_client);
    client.test = draw(test_pool, test_left, spec.test_per_client);
  }
  return out;
}

}  // namespace fedcgs
