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
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedcgs/client_stats.hpp"
#include "fedcgs/errors.hpp"
#include "fedcgs/random.hpp"

// Simulation of pairwise-masked secure summation. Each pair of participants
// shares a seed; the lower id adds the pair's mask stream, the higher id
// subtracts it, so masks cancel in the modular sum and the server only
// learns the total. Seeds come from an in-process trusted setup; there is
// no key agreement and no dropout recovery.

namespace fedcgs {

enum class SecureScope {
  counts_only,      // only N_i^j is masked; sums and B_i travel in the clear
  full_statistics,  // every uploaded field is masked
};

/// Two's-complement fixed point modulo 2^64.
struct FixedPointCodec {
  int fractional_bits = 24;

  void validate() const {
    if (fractional_bits <= 0 || fractional_bits >= 52)
      throw Error("fractional_bits must lie in (0, 52)");
  }

  static std::uint64_t encode_with(double value, int bits) {
    const double limit = std::ldexp(1.0, 63 - bits);
    if (!std::isfinite(value) || std::fabs(value) >= limit)
      throw OverflowError("value " + std::to_string(value) + " does not fit in fixed point with " +
                          std::to_string(bits) + " fractional bits");
    const auto scaled = static_cast<std::int64_t>(std::llround(std::ldexp(value, bits)));
    return static_cast<std::uint64_t>(scaled);
  }

  static double decode_with(std::uint64_t word, int bits) {
    return std::ldexp(static_cast<double>(static_cast<std::int64_t>(word)), -bits);
  }

  std::uint64_t encode(double value) const { return encode_with(value, fractional_bits); }
  double decode(std::uint64_t word) const { return decode_with(word, fractional_bits); }
};

struct MaskedUpload {
  std::uint32_t client_id = 0;
  std::vector<std::uint64_t> payload;
};

class SecureSession {
 public:
  /// Trusted setup: draws one seed per unordered pair of participants.
  static SecureSession setup(std::vector<std::uint32_t> participants, std::size_t dim,
                             std::size_t num_classes, SecureScope scope, std::uint64_t setup_seed,
                             FixedPointCodec codec = {}) {
    codec.validate();
    std::sort(participants.begin(), participants.end());
    if (participants.empty()) throw ProtocolError("session needs at least one participant");
    if (std::adjacent_find(participants.begin(), participants.end()) != participants.end())
      throw ProtocolError("duplicate participant id");
    SecureSession s;
    s.participants_ = std::move(participants);
    s.dim_ = dim;
    s.num_classes_ = num_classes;
    s.scope_ = scope;
    s.codec_ = codec;
    Rng dealer(setup_seed);
    for (std::size_t a = 0; a < s.participants_.size(); ++a)
      for (std::size_t b = a + 1; b < s.participants_.size(); ++b)
        s.pair_seeds_[{s.participants_[a], s.participants_[b]}] = dealer.next_u64();
    return s;
  }

  const std::vector<std::uint32_t>& participants() const { return participants_; }
  std::size_t dim() const { return dim_; }
  std::size_t num_classes() const { return num_classes_; }
  SecureScope scope() const { return scope_; }
  const FixedPointCodec& codec() const { return codec_; }
  std::size_t pair_count() const { return pair_seeds_.size(); }

  bool is_participant(std::uint32_t id) const {
    return std::binary_search(participants_.begin(), participants_.end(), id);
  }

  /// Seed shared by an unordered pair; both members see the same value.
  std::uint64_t pair_seed(std::uint32_t a, std::uint32_t b) const {
    if (a > b) std::swap(a, b);
    const auto it = pair_seeds_.find({a, b});
    if (it == pair_seeds_.end()) throw ProtocolError("no shared seed for this pair");
    return it->second;
  }

  /// Number of 64-bit words each client sends.
  std::size_t payload_length() const {
    return scope_ == SecureScope::counts_only ? num_classes_
                                              : upload_scalar_count(dim_, num_classes_);
  }

 private:
  SecureSession() = default;

  std::vector<std::uint32_t> participants_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> pair_seeds_;
  std::size_t dim_ = 0;
  std::size_t num_classes_ = 0;
  SecureScope scope_ = SecureScope::counts_only;
  FixedPointCodec codec_;
};

/// Unmasked fixed-point words in upload order: counts (exact integers),
/// then class sums and second moment when the scope covers them.
inline std::vector<std::uint64_t> plain_encoding(const ClientStatistics& stats,
                                                 const SecureSession& session) {
  detail::require_dim(stats.dim(), session.dim(), "plain_encoding (feature dim)");
  detail::require_dim(stats.num_classes(), session.num_classes(), "plain_encoding (class count)");
  std::vector<std::uint64_t> words;
  words.reserve(session.payload_length());
  for (auto c : stats.class_counts) {
    if (c >= (std::uint64_t{1} << 63)) throw OverflowError("class count does not fit");
    words.push_back(c);
  }
  if (session.scope() == SecureScope::full_statistics) {
    const auto& codec = session.codec();
    for (double v : stats.class_sums.flat()) words.push_back(codec.encode(v));
    for (double v : stats.second_moment.flat()) words.push_back(codec.encode(v));
  }
  return words;
}

inline MaskedUpload encode_masked(const ClientStatistics& stats, const SecureSession& session,
                                  std::uint32_t client_id) {
  if (!session.is_participant(client_id))
    throw ProtocolError("client " + std::to_string(client_id) + " is not in the session");
  MaskedUpload upload{client_id, plain_encoding(stats, session)};
  for (auto other : session.participants()) {
    if (other == client_id) continue;
    const auto seed = session.pair_seed(client_id, other);
    const bool add = client_id < other;
    for (std::size_t i = 0; i < upload.payload.size(); ++i) {
      const auto mask = counter_stream(seed, i);
      upload.payload[i] = add ? upload.payload[i] + mask : upload.payload[i] - mask;
    }
  }
  return upload;
}

/// Modular sum of every participant's payload. Masks cancel, leaving the
/// sum of the plain encodings.
inline std::vector<std::uint64_t> sum_masked(std::span<const MaskedUpload> uploads,
                                             const SecureSession& session) {
  std::vector<const MaskedUpload*> ordered;
  ordered.reserve(uploads.size());
  for (const auto& u : uploads) ordered.push_back(&u);
  std::sort(ordered.begin(), ordered.end(),
            [](const MaskedUpload* a, const MaskedUpload* b) { return a->client_id < b->client_id; });

  const auto& expected = session.participants();
  if (ordered.size() != expected.size())
    throw ProtocolError("expected " + std::to_string(expected.size()) + " uploads, got " +
                        std::to_string(ordered.size()));
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (ordered[i]->client_id != expected[i])
      throw ProtocolError("upload set does not match session participants (missing client " +
                          std::to_string(expected[i]) + ")");
    if (ordered[i]->payload.size() != session.payload_length())
      throw ProtocolError("payload length mismatch from client " +
                          std::to_string(ordered[i]->client_id));
  }

  std::vector<std::uint64_t> total(session.payload_length(), 0);
  for (const auto* u : ordered)
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += u->payload[i];
  return total;
}

/// Decodes the masked sum. With counts_only scope the class sums and second
/// moment of the result are zero; the caller supplies them from the
/// plaintext channel.
inline ClientStatistics aggregate_masked(std::span<const MaskedUpload> uploads,
                                         const SecureSession& session) {
  const auto total = sum_masked(uploads, session);
  auto out = ClientStatistics::zero(session.dim(), session.num_classes());
  std::size_t w = 0;
  for (auto& c : out.class_counts) c = total[w++];
  if (session.scope() == SecureScope::full_statistics) {
    const auto& codec = session.codec();
    for (auto& v : out.class_sums.flat()) v = codec.decode(total[w++]);
    const std::size_t d = session.dim();
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        const double v = codec.decode(total[w++]);
        if (c >= r) out.second_moment.set(r, c, v);
      }
    }
  }
  return out;
}

}  // namespace fedcgs
