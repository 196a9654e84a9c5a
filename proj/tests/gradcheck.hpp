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

// Central-difference gradient checks for the personalization objective.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "fedcgs/personalize.hpp"

namespace fedcgs::gradcheck {

inline std::vector<double> flatten(const MlpModel& m) {
  std::vector<double> out;
  m.for_each_tensor([&](std::span<const double> t) { out.insert(out.end(), t.begin(), t.end()); });
  return out;
}

inline void unflatten(MlpModel& m, const std::vector<double>& flat) {
  std::size_t k = 0;
  m.for_each_tensor([&](std::span<double> t) {
    for (auto& v : t) v = flat[k++];
  });
}

/// Central differences of `value(model)` for every parameter.
template <typename Fn>
std::vector<double> numeric_gradient(const MlpModel& m, Fn&& value, double step) {
  auto params = flatten(m);
  std::vector<double> grad(params.size());
  MlpModel probe = m;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    unflatten(probe, params);
    const double up = value(probe);
    params[i] = saved - step;
    unflatten(probe, params);
    const double down = value(probe);
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

/// ||analytic - numeric|| / ||numeric|| over all parameters.
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    num += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    den += numeric[i] * numeric[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

inline double objective_gradient_error(const MlpModel& m, const LabeledFeatureSet& data,
                                       const PrototypeSet& protos, double lambda, double step) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  MlpModel grad;
  objective_and_gradient(m, data, rows, protos, lambda, &grad);
  const auto numeric = numeric_gradient(
      m, [&](const MlpModel& p) { return objective(p, data, protos, lambda).total; }, step);
  return relative_error(flatten(grad), numeric);
}

/// Gradient of R alone: analytic(lambda = 1) - analytic(lambda = 0) against
/// central differences of regularizer().
inline double regularizer_gradient_error(const MlpModel& m, const LabeledFeatureSet& data,
                                         const PrototypeSet& protos, double step) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  MlpModel with;
  MlpModel without;
  objective_and_gradient(m, data, rows, protos, 1.0, &with);
  objective_and_gradient(m, data, rows, protos, 0.0, &without);
  auto analytic = flatten(with);
  const auto base = flatten(without);
  for (std::size_t i = 0; i < analytic.size(); ++i) analytic[i] -= base[i];
  const auto numeric =
      numeric_gradient(m, [&](const MlpModel& p) { return regularizer(p, data, protos); }, step);
  return relative_error(analytic, numeric);
}

}  // namespace fedcgs::gradcheck
