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
#ifndef NORMEF_RNG_HPP
#define NORMEF_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

#include "normef/core.hpp"

namespace normef {

/// One element of a stream path: either a tag ("client", "grad") or an
/// integer (client index, iteration).
class PathLabel {
 public:
  PathLabel(std::string_view tag);
  PathLabel(const char* tag) : PathLabel(std::string_view(tag)) {}
  template <typename Int,
            typename = std::enable_if_t<std::is_integral_v<Int>>>
  PathLabel(Int index)
      : hash_(mix(static_cast<std::uint64_t>(index) ^ kIndexSalt)) {}

  std::uint64_t hash() const { return hash_; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  static constexpr std::uint64_t kIndexSalt = 0x6a09e667f3bcc909ULL;
  std::uint64_t hash_;
};

/// Counter-based random stream keyed by (master seed, path).
///
/// Draw k is a pure function of (key, k), so a stream can be copied and
/// replayed, and sub-streams derived from different paths never share state.
/// Satisfies UniformRandomBitGenerator so <random> distributions apply.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t key = 0) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  /// Sub-stream at path (this path, labels...). Does not advance *this.
  RngStream derive(std::initializer_list<PathLabel> labels) const;
  RngStream derive(const PathLabel& label) const { return derive({label}); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  /// Standard normal draw.
  double normal();
  /// Vector of iid N(0, stddev^2) entries.
  Vector gaussian(Eigen::Index d, double stddev);

  std::uint64_t key() const { return key_; }
  std::uint64_t position() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

RngStream derive_stream(std::uint64_t master_seed,
                        std::initializer_list<PathLabel> path = {});

}  // namespace normef

#endif  // NORMEF_RNG_HPP
