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
#include <string_view>

#include "fedcgs/dataio.hpp"
#include "fedcgs/errors.hpp"
#include "fedcgs/numcore.hpp"
#include "fedcgs/random.hpp"

namespace fedcgs {

enum class Activation { relu, tanh, none };

inline Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "none") return Activation::none;
  throw Error("unknown activation '" + std::string(name) + "' (expected relu, tanh or none)");
}

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::none: return "none";
  }
  return "none";
}

/// Random projection shared by every client in a run.
struct ExpansionConfig {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::uint64_t seed = 0;
  Activation activation = Activation::relu;
};

#ifdef FEDCGS_TESTING
// Test builds only: with this seed and output_dim == input_dim the
// projection is the identity.
inline constexpr std::uint64_t kIdentityProjectionSeed = 0xFFFFFFFFFFFFFFFFULL;
#endif

/// d x d' matrix with N(0, 1) entries scaled by 1/sqrt(d), generated row-major
/// from the seed.
inline Matrix projection_matrix(const ExpansionConfig& cfg) {
  if (cfg.input_dim == 0 || cfg.output_dim == 0)
    throw Error("expansion dimensions must be positive");
#ifdef FEDCGS_TESTING
  if (cfg.seed == kIdentityProjectionSeed && cfg.input_dim == cfg.output_dim)
    return Matrix::identity(cfg.input_dim);
#endif
  Matrix p(cfg.input_dim, cfg.output_dim);
  Rng rng(cfg.seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.input_dim));
  for (auto& v : p.flat()) v = rng.normal() * scale;
  return p;
}

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
    case Activation::none: return x;
  }
  return x;
}

/// Row-wise activation(f P); labels pass through.
inline LabeledFeatureSet expand(const LabeledFeatureSet& features, const Matrix& projection,
                                Activation activation) {
  detail::require_dim(features.dim(), projection.rows(), "expand");
  const std::size_t out_dim = projection.cols();
  LabeledFeatureSet out{Matrix(features.size(), out_dim), features.labels, features.num_classes};
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto f = features.row(i);
    auto y = out.features.row(i);
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double fk = f[k];
      if (fk == 0.0) continue;
      const auto prow = projection.row(k);
      for (std::size_t c = 0; c < out_dim; ++c) y[c] += fk * prow[c];
    }
    for (auto& v : y) v = activate(activation, v);
  }
  return out;
}

inline LabeledFeatureSet expand(const LabeledFeatureSet& features, const ExpansionConfig& cfg) {
  detail::require_dim(features.dim(), cfg.input_dim, "expand");
  return expand(features, projection_matrix(cfg), cfg.activation);
}

}  // namespace fedcgs
