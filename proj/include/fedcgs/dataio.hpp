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
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fedcgs/binary_io.hpp"
#include "fedcgs/errors.hpp"
#include "fedcgs/numcore.hpp"
#include "fedcgs/random.hpp"

namespace fedcgs {

/// N feature rows of dimension d with labels in [0, C).
///
/// Features are held in double precision. Sets loaded from disk (and sets
/// produced by the synthetic generators) hold values that are exactly
/// representable in single precision, which is what the file stores.
/// An in-memory set may be empty: partitioning can leave a client with no
/// samples.
struct LabeledFeatureSet {
  Matrix features;  // N x d
  std::vector<std::uint32_t> labels;
  std::uint32_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  std::span<const double> row(std::size_t i) const { return features.row(i); }

  /// Empty set with the given shape.
  static LabeledFeatureSet empty(std::size_t dim, std::uint32_t num_classes) {
    return {Matrix(0, dim), {}, num_classes};
  }

  /// Throws IntegrityError if any invariant other than N >= 1 is violated.
  void validate() const {
    if (dim() == 0) throw IntegrityError("feature dimension must be positive");
    if (num_classes == 0) throw IntegrityError("number of classes must be positive");
    if (features.rows() != labels.size())
      throw IntegrityError("feature rows and labels differ in count");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= num_classes)
        throw IntegrityError("label " + std::to_string(labels[i]) + " at row " +
                             std::to_string(i) + " is not below C=" + std::to_string(num_classes));
    }
    for (double v : features.flat())
      if (!std::isfinite(v)) throw IntegrityError("non-finite feature value");
  }

  std::vector<std::size_t> class_histogram() const {
    std::vector<std::size_t> h(num_classes, 0);
    for (auto y : labels) ++h[y];
    return h;
  }

  friend bool operator==(const LabeledFeatureSet&, const LabeledFeatureSet&) = default;
};

/// Rows of `data` selected by `indices`, in the given order.
inline LabeledFeatureSet subset(const LabeledFeatureSet& data, std::span<const std::size_t> indices) {
  LabeledFeatureSet out{Matrix(indices.size(), data.dim()), {}, data.num_classes};
  out.labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto src = data.row(indices[k]);
    std::copy(src.begin(), src.end(), out.features.row(k).begin());
    out.labels.push_back(data.labels[indices[k]]);
  }
  return out;
}

/// Row-wise concatenation. All parts must share d and C.
inline LabeledFeatureSet concatenate(std::span<const LabeledFeatureSet> parts) {
  if (parts.empty()) throw Error("concatenate: no parts");
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_dim(p.dim(), parts[0].dim(), "concatenate");
    if (p.num_classes != parts[0].num_classes) throw Error("concatenate: class count differs");
    total += p.size();
  }
  LabeledFeatureSet out{Matrix(total, parts[0].dim()), {}, parts[0].num_classes};
  std::size_t r = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < p.size(); ++i, ++r) {
      const auto src = p.row(i);
      std::copy(src.begin(), src.end(), out.features.row(r).begin());
    }
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// FCGS feature file (little-endian):
//   "FCGS" | version u32 (=1) | N u64 | d u32 | C u32     24-byte header
//   N*d float32 features, row-major
//   N   u32 labels
// ---------------------------------------------------------------------------

inline constexpr char kFeatureMagic[4] = {'F', 'C', 'G', 'S'};
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 24;

inline std::uint64_t feature_file_size(std::uint64_t n, std::uint64_t d) {
  return kFeatureHeaderBytes + n * d * 4 + n * 4;
}

inline std::vector<std::uint8_t> encode_feature_set(const LabeledFeatureSet& set) {
  set.validate();
  if (set.size() == 0) throw IntegrityError("feature file requires at least one sample");
  std::vector<std::uint8_t> out;
  out.reserve(feature_file_size(set.size(), set.dim()));
  out.insert(out.end(), kFeatureMagic, kFeatureMagic + 4);
  io::put_le<std::uint32_t>(out, kFeatureVersion);
  io::put_le<std::uint64_t>(out, set.size());
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.dim()));
  io::put_le<std::uint32_t>(out, set.num_classes);
  for (double v : set.features.flat()) io::put_le<float>(out, static_cast<float>(v));
  for (auto y : set.labels) io::put_le<std::uint32_t>(out, y);
  return out;
}

inline LabeledFeatureSet decode_feature_set(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFeatureHeaderBytes) throw TruncationError("feature file shorter than header");
  if (std::memcmp(bytes.data(), kFeatureMagic, 4) != 0) throw FormatError("bad magic");
  const auto version = io::get_le<std::uint32_t>(bytes, 4);
  if (version != kFeatureVersion)
    throw FormatError("unsupported feature file version " + std::to_string(version));
  const auto n = io::get_le<std::uint64_t>(bytes, 8);
  const auto d = io::get_le<std::uint32_t>(bytes, 16);
  const auto c = io::get_le<std::uint32_t>(bytes, 20);
  if (n == 0 || d == 0 || c == 0) throw FormatError("header declares an empty dimension");
  // Guard the size arithmetic against absurd headers.
  if (n > (std::uint64_t{1} << 40) / d) throw FormatError("header sample count is implausible");
  const auto expected = feature_file_size(n, d);
  if (bytes.size() < expected)
    throw TruncationError("payload holds " + std::to_string(bytes.size()) + " bytes, header implies " +
                          std::to_string(expected));
  if (bytes.size() > expected) throw FormatError("trailing bytes after label block");

  LabeledFeatureSet set{Matrix(n, d), std::vector<std::uint32_t>(n), c};
  auto flat = set.features.flat();
  std::size_t offset = kFeatureHeaderBytes;
  for (auto& v : flat) {
    v = static_cast<double>(io::get_le<float>(bytes, offset));
    offset += 4;
  }
  for (auto& y : set.labels) {
    y = io::get_le<std::uint32_t>(bytes, offset);
    offset += 4;
  }
  set.validate();
  return set;
}

inline LabeledFeatureSet read_feature_file(const std::filesystem::path& path) {
  return decode_feature_set(io::read_bytes(path));
}

inline void write_feature_file(const LabeledFeatureSet& set, const std::filesystem::path& path) {
  if (path.empty()) throw IoError("empty output path");
  io::write_bytes(path, encode_feature_set(set));
}

// ---------------------------------------------------------------------------
// Synthetic features.
// ---------------------------------------------------------------------------

/// Class-conditional Gaussians with one shared isotropic covariance.
struct SyntheticSpec {
  std::uint32_t num_classes = 10;
  std::uint32_t dim = 32;
  std::uint32_t samples_per_class = 100;
  double class_mean_scale = 3.0;
  double shared_covariance_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_classes == 0 || dim == 0 || samples_per_class == 0)
      throw Error("SyntheticSpec: counts must be positive");
    if (!(class_mean_scale > 0.0) || !(shared_covariance_scale > 0.0))
      throw Error("SyntheticSpec: scales must be positive");
  }
};

/// m_j = class_mean_scale * u_j with u_j a seeded unit-norm direction.
inline std::vector<Vector> synthetic_class_means(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(mix64(spec.seed ^ 0x6D65616E73ULL));
  std::vector<Vector> means;
  means.reserve(spec.num_classes);
  for (std::uint32_t j = 0; j < spec.num_classes; ++j) {
    Vector u(spec.dim);
    double n2 = 0.0;
    do {
      for (auto& x : u) x = rng.normal();
      n2 = norm2(u.span());
    } while (n2 == 0.0);
    u *= spec.class_mean_scale / n2;
    means.push_back(std::move(u));
  }
  return means;
}

/// Rows are grouped by class (class 0 first). Values are rounded to single
/// precision so the set survives a feature-file round trip unchanged.
inline LabeledFeatureSet generate_synthetic(const SyntheticSpec& spec) {
  const auto means = synthetic_class_means(spec);
  const std::size_t n = std::size_t{spec.num_classes} * spec.samples_per_class;
  LabeledFeatureSet set{Matrix(n, spec.dim), std::vector<std::uint32_t>(n), spec.num_classes};
  Rng rng(mix64(spec.seed ^ 0x73616D706C6573ULL));
  const double sd = std::sqrt(spec.shared_covariance_scale);
  std::size_t r = 0;
  for (std::uint32_t j = 0; j < spec.num_classes; ++j) {
    for (std::uint32_t s = 0; s < spec.samples_per_class; ++s, ++r) {
      auto row = set.features.row(r);
      for (std::size_t k = 0; k < spec.dim; ++k)
        row[k] = static_cast<double>(static_cast<float>(means[j][k] + sd * rng.normal()));
      set.labels[r] = j;
    }
  }
  return set;
}

/// Two-class XOR layout in 2-D: class 0 clusters at (+s,+s) and (-s,-s),
/// class 1 at (+s,-s) and (-s,+s), each with isotropic noise. Both classes
/// have mean zero, so no linear rule separates them.
inline LabeledFeatureSet generate_xor(std::uint32_t samples_per_class, double spread, double noise,
                                      std::uint64_t seed) {
  const std::size_t n = 2 * std::size_t{samples_per_class};
  LabeledFeatureSet set{Matrix(n, 2), std::vector<std::uint32_t>(n), 2};
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t label = i < samples_per_class ? 0 : 1;
    const double sx = (i % 2 == 0) ? spread : -spread;
    const double sy = label == 0 ? sx : -sx;
    set.features(i, 0) = static_cast<double>(static_cast<float>(sx + noise * rng.normal()));
    set.features(i, 1) = static_cast<double>(static_cast<float>(sy + noise * rng.normal()));
    set.labels[i] = label;
  }
  return set;
}

}  // namespace fedcgs
