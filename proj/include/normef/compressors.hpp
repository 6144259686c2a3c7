// Copyright 2026 The normef Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================
#ifndef NORMEF_COMPRESSORS_HPP
#define NORMEF_COMPRESSORS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "normef/core.hpp"
#include "normef/rng.hpp"

namespace normef {

enum class CompressorKind { Identity, TopK, RandK };

/// A contractive compressor C with E||C(v) - v||^2 <= (1 - alpha)||v||^2.
struct CompressorSpec {
  CompressorKind kind = CompressorKind::Identity;
  std::size_t k = 0;  // ignored for Identity
  std::size_t d = 0;

  static CompressorSpec identity(std::size_t d);
  static CompressorSpec top_k(std::size_t k, std::size_t d);
  static CompressorSpec rand_k(std::size_t k, std::size_t d);
  /// k = max(1, floor(fraction * d)), fraction in (0, 1].
  static CompressorSpec from_fraction(CompressorKind kind, double fraction,
                                      std::size_t d);
  /// Parses "identity", "topk:<fraction>" or "randk:<fraction>".
  static CompressorSpec parse(std::string_view text, std::size_t d);

  /// Retained coordinates per message (d for Identity).
  std::size_t kept() const { return kind == CompressorKind::Identity ? d : k; }
  void validate() const;
};

/// Contraction factor: k/d for TopK and RandK, 1 for Identity.
double alpha(const CompressorSpec& spec);

std::string to_string(const CompressorSpec& spec);

struct CompressedMessage {
  std::vector<std::uint32_t> indices;  // strictly increasing
  std::vector<double> values;
  std::size_t d = 0;

  bool dense() const { return indices.size() == d; }
};

CompressedMessage compress(const CompressorSpec& spec, const Vector& v,
                           RngStream& rng);

Vector densify(const CompressedMessage& msg);
/// target += densify(msg) without materializing the dense vector.
void accumulate(const CompressedMessage& msg, double scale, Vector& target);

/// ||C(v) - v||^2 / ||v||^2 for one realization of C.
double contraction_gap(const CompressorSpec& spec, const Vector& v,
                       RngStream& rng);

inline constexpr std::uint64_t kIndexBits = 32;
inline constexpr std::uint64_t kValueBits = 64;

/// Wire cost: count * (index bits + value bits); full-length messages
/// carry no indices and cost d * 64.
std::uint64_t payload_bits(const CompressedMessage& msg);

/// Framed little-endian record: d (u32), count (u32), indices (u32 each),
/// values (f64 each).
void write_message(std::ostream& out, const CompressedMessage& msg);
/// Reads one record; returns false at clean end of stream.
bool read_message(std::istream& in, CompressedMessage& msg);

}  // namespace normef

#endif  // NORMEF_COMPRESSORS_HPP
