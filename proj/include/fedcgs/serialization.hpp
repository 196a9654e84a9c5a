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
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedcgs/binary_io.hpp"
#include "fedcgs/errors.hpp"
#include "fedcgs/gnb_head.hpp"
#include "fedcgs/server_agg.hpp"

// Global statistics and heads are stored as a JSON metadata document plus a
// binary sidecar next to it. Sidecar layout (little-endian):
//   "FCGS" | version u32 (=1) | kind u32 | d u32 | C u32 | reserved u32
//   kind 2 (global statistics): prototypes C*d, mean d, covariance d*d,
//                               class sums C*d  (all f64, row-major)
//   kind 3 (linear head):       weights C*d, bias C  (f64, row-major)

namespace fedcgs {

inline constexpr std::uint32_t kSidecarVersion = 1;
inline constexpr std::uint32_t kSidecarGlobalStats = 2;
inline constexpr std::uint32_t kSidecarLinearHead = 3;
inline constexpr std::size_t kSidecarHeaderBytes = 24;

namespace detail {

inline std::filesystem::path sidecar_path(const std::filesystem::path& json_path) {
  auto p = json_path;
  p.replace_extension(".bin");
  return p;
}

inline void put_sidecar_header(std::vector<std::uint8_t>& out, std::uint32_t kind, std::size_t d,
                               std::size_t c) {
  out.insert(out.end(), {'F', 'C', 'G', 'S'});
  io::put_le<std::uint32_t>(out, kSidecarVersion);
  io::put_le<std::uint32_t>(out, kind);
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c));
  io::put_le<std::uint32_t>(out, 0);
}

/// Checks the header and returns a reader positioned after it.
class SidecarReader {
 public:
  SidecarReader(std::vector<std::uint8_t> bytes, std::uint32_t kind, std::size_t d, std::size_t c,
                std::size_t doubles)
      : bytes_(std::move(bytes)), offset_(kSidecarHeaderBytes) {
    if (bytes_.size() < kSidecarHeaderBytes) throw TruncationError("sidecar shorter than header");
    if (std::memcmp(bytes_.data(), "FCGS", 4) != 0) throw FormatError("sidecar: bad magic");
    if (io::get_le<std::uint32_t>(bytes_, 4) != kSidecarVersion)
      throw FormatError("sidecar: unsupported version");
    if (io::get_le<std::uint32_t>(bytes_, 8) != kind) throw FormatError("sidecar: wrong record kind");
    if (io::get_le<std::uint32_t>(bytes_, 12) != d || io::get_le<std::uint32_t>(bytes_, 16) != c)
      throw IntegrityError("sidecar shape disagrees with metadata");
    const auto expected = kSidecarHeaderBytes + 8 * doubles;
    if (bytes_.size() < expected) throw TruncationError("sidecar payload is truncated");
    if (bytes_.size() > expected) throw FormatError("sidecar has trailing bytes");
  }

  double next() {
    const double v = io::get_le<double>(bytes_, offset_);
    offset_ += 8;
    return v;
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t offset_;
};

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  if (path.empty()) throw IoError("empty output path");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void expect_format(const nlohmann::json& doc, const char* format) {
  if (!doc.contains("format") || doc["format"] != format || doc.value("version", 0) != 1)
    throw FormatError(std::string("expected a '") + format + "' version 1 document");
}

}  // namespace detail

inline void write_global_statistics(const GlobalStatistics& g, const std::filesystem::path& path) {
  const std::size_t d = g.dim();
  const std::size_t c = g.num_classes();
  const auto sidecar = detail::sidecar_path(path);
  nlohmann::json doc = {{"format", "fcgs.global_statistics"},
                        {"version", 1},
                        {"dim", d},
                        {"num_classes", c},
                        {"total_count", g.total_count},
                        {"class_counts", g.class_counts},
                        {"present", g.present},
                        {"priors", g.priors},
                        {"sidecar", sidecar.filename().string()}};
  std::vector<std::uint8_t> bin;
  detail::put_sidecar_header(bin, kSidecarGlobalStats, d, c);
  for (double v : g.prototypes.flat()) io::put_le<double>(bin, v);
  for (double v : g.global_mean) io::put_le<double>(bin, v);
  for (double v : g.covariance.flat()) io::put_le<double>(bin, v);
  for (double v : g.class_sums.flat()) io::put_le<double>(bin, v);
  io::write_bytes(sidecar, bin);
  detail::write_json(path, doc);
}

inline GlobalStatistics read_global_statistics(const std::filesystem::path& path) {
  const auto doc = detail::read_json(path);
  detail::expect_format(doc, "fcgs.global_statistics");
  try {
    const std::size_t d = doc.at("dim").get<std::size_t>();
    const std::size_t c = doc.at("num_classes").get<std::size_t>();
    GlobalStatistics g;
    g.total_count = doc.at("total_count").get<std::uint64_t>();
    g.class_counts = doc.at("class_counts").get<std::vector<std::uint64_t>>();
    g.present = doc.at("present").get<std::vector<bool>>();
    g.priors = doc.at("priors").get<std::vector<double>>();
    if (g.class_counts.size() != c || g.present.size() != c || g.priors.size() != c)
      throw IntegrityError("per-class arrays disagree with num_classes");
    detail::SidecarReader bin(io::read_bytes(path.parent_path() / doc.at("sidecar").get<std::string>()),
                              kSidecarGlobalStats, d, c, 2 * c * d + d + d * d);
    g.prototypes = Matrix(c, d);
    for (auto& v : g.prototypes.flat()) v = bin.next();
    g.global_mean = Vector(d);
    for (auto& v : g.global_mean) v = bin.next();
    g.covariance = SymmetricMatrix(d);
    auto cov = g.covariance.raw();
    for (auto& v : cov) v = bin.next();
    if (!g.covariance.is_symmetric()) throw IntegrityError("stored covariance is not symmetric");
    g.class_sums = Matrix(c, d);
    for (auto& v : g.class_sums.flat()) v = bin.next();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

inline void write_head(const LinearHead& head, const std::filesystem::path& path) {
  const std::size_t d = head.dim();
  const std::size_t c = head.num_classes();
  const auto sidecar = detail::sidecar_path(path);
  nlohmann::json doc = {{"format", "fcgs.linear_head"},
                        {"version", 1},
                        {"dim", d},
                        {"num_classes", c},
                        {"present", head.present},
                        {"ridge_used", head.ridge_used},
                        {"sidecar", sidecar.filename().string()}};
  std::vector<std::uint8_t> bin;
  detail::put_sidecar_header(bin, kSidecarLinearHead, d, c);
  for (double v : head.weights.flat()) io::put_le<double>(bin, v);
  for (double v : head.bias) io::put_le<double>(bin, v);
  io::write_bytes(sidecar, bin);
  detail::write_json(path, doc);
}

inline LinearHead read_head(const std::filesystem::path& path) {
  const auto doc = detail::read_json(path);
  detail::expect_format(doc, "fcgs.linear_head");
  try {
    const std::size_t d = doc.at("dim").get<std::size_t>();
    const std::size_t c = doc.at("num_classes").get<std::size_t>();
    LinearHead head;
    head.present = doc.at("present").get<std::vector<bool>>();
    head.ridge_used = doc.at("ridge_used").get<double>();
    if (head.present.size() != c) throw IntegrityError("present mask disagrees with num_classes");
    detail::SidecarReader bin(io::read_bytes(path.parent_path() / doc.at("sidecar").get<std::string>()),
                              kSidecarLinearHead, d, c, c * d + c);
    head.weights = Matrix(c, d);
    for (auto& v : head.weights.flat()) v = bin.next();
    head.bias.resize(c);
    for (auto& v : head.bias) v = bin.next();
    return head;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace fedcgs
