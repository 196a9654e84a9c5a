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
#include <span>
#include <vector>

#include "fedcgs/binary_io.hpp"
#include "fedcgs/dataio.hpp"
#include "fedcgs/errors.hpp"
#include "fedcgs/numcore.hpp"

namespace fedcgs {

/// One client's upload: per-class feature sums A_i^j, the uncentered second
/// moment B_i = sum f^T f, and per-class counts N_i^j.
struct ClientStatistics {
  Matrix class_sums;               // C x d, row j is A_i^j
  SymmetricMatrix second_moment;   // d x d
  std::vector<std::uint64_t> class_counts;  // C

  static ClientStatistics zero(std::size_t dim, std::size_t num_classes) {
    return {Matrix(num_classes, dim), SymmetricMatrix(dim),
            std::vector<std::uint64_t>(num_classes, 0)};
  }

  std::size_t dim() const { return second_moment.dim(); }
  std::size_t num_classes() const { return class_counts.size(); }

  std::uint64_t total_count() const {
    std::uint64_t n = 0;
    for (auto c : class_counts) n += c;
    return n;
  }

  /// A = sum_j A^j.
  Vector feature_sum() const {
    Vector a(dim());
    for (std::size_t j = 0; j < num_classes(); ++j) a += class_sums.row(j);
    return a;
  }

  friend bool operator==(const ClientStatistics&, const ClientStatistics&) = default;
};

/// Single streaming pass over the client's rows in file order.
inline ClientStatistics compute_client_stats(const LabeledFeatureSet& data) {
  auto stats = ClientStatistics::zero(data.dim(), data.num_classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto f = data.row(i);
    const auto y = data.labels[i];
    auto sum = stats.class_sums.row(y);
    for (std::size_t k = 0; k < f.size(); ++k) sum[k] += f[k];
    stats.second_moment.add_outer(f);
    ++stats.class_counts[y];
  }
  return stats;
}

inline void check_same_shape(const ClientStatistics& a, const ClientStatistics& b) {
  detail::require_dim(b.dim(), a.dim(), "merge_stats (feature dim)");
  detail::require_dim(b.num_classes(), a.num_classes(), "merge_stats (class count)");
}

/// Componentwise sum.
inline ClientStatistics merge_stats(ClientStatistics a, const ClientStatistics& b) {
  check_same_shape(a, b);
  auto dst = a.class_sums.flat();
  const auto src = b.class_sums.flat();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  a.second_moment += b.second_moment;
  for (std::size_t j = 0; j < a.class_counts.size(); ++j) a.class_counts[j] += b.class_counts[j];
  return a;
}

/// Left fold of merge_stats in the given order (ascending client id by
/// convention).
inline ClientStatistics merge_all(std::span<const ClientStatistics> parts) {
  if (parts.empty()) throw Error("merge_all: no statistics to merge");
  ClientStatistics acc = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) acc = merge_stats(std::move(acc), parts[i]);
  return acc;
}

// ---------------------------------------------------------------------------
// Upload payload (little-endian):
//   d u32 | C u32 | C counts u64 | C*d class sums f64 (row-major) |
//   d*d second moment f64 (row-major, full matrix)
// Every scalar after the 8-byte header is 8 bytes wide.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kUploadHeaderBytes = 8;

/// Number of scalars in an upload: (C + d) * d + C.
inline constexpr std::uint64_t upload_scalar_count(std::uint64_t dim, std::uint64_t num_classes) {
  return (num_classes + dim) * dim + num_classes;
}

inline std::vector<std::uint8_t> encode_upload(const ClientStatistics& stats) {
  std::vector<std::uint8_t> out;
  out.reserve(kUploadHeaderBytes + 8 * upload_scalar_count(stats.dim(), stats.num_classes()));
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(stats.dim()));
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(stats.num_classes()));
  for (auto c : stats.class_counts) io::put_le<std::uint64_t>(out, c);
  for (double v : stats.class_sums.flat()) io::put_le<double>(out, v);
  for (double v : stats.second_moment.flat()) io::put_le<double>(out, v);
  return out;
}

inline ClientStatistics decode_upload(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kUploadHeaderBytes) throw TruncationError("upload shorter than header");
  const auto d = io::get_le<std::uint32_t>(bytes, 0);
  const auto c = io::get_le<std::uint32_t>(bytes, 4);
  const auto expected = kUploadHeaderBytes + 8 * upload_scalar_count(d, c);
  if (bytes.size() != expected)
    throw TruncationError("upload holds " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(expected));
  auto stats = ClientStatistics::zero(d, c);
  std::size_t offset = kUploadHeaderBytes;
  for (auto& n : stats.class_counts) {
    n = io::get_le<std::uint64_t>(bytes, offset);
    offset += 8;
  }
  for (auto& v : stats.class_sums.flat()) {
    v = io::get_le<double>(bytes, offset);
    offset += 8;
  }
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t col = 0; col < d; ++col) {
      const double v = io::get_le<double>(bytes, offset);
      offset += 8;
      if (col >= r) stats.second_moment.set(r, col, v);
      else if (v != stats.second_moment(r, col))
        throw IntegrityError("upload second moment is not symmetric");
    }
  }
  return stats;
}

}  // namespace fedcgs
