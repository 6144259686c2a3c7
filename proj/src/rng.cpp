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
#include "normef/rng.hpp"

#include <bit>
#include <random>

namespace normef {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

// SplitMix64 finalizer.
std::uint64_t PathLabel::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

PathLabel::PathLabel(std::string_view tag) : hash_(mix(fnv1a(tag))) {}

RngStream::result_type RngStream::operator()() {
  ++counter_;
  std::uint64_t z = PathLabel::mix(counter_ * kGolden + key_);
  return PathLabel::mix(z ^ std::rotl(key_, 32));
}

RngStream RngStream::derive(std::initializer_list<PathLabel> labels) const {
  std::uint64_t k = key_;
  for (const PathLabel& label : labels)
    k = PathLabel::mix(std::rotl(k, 17) ^ label.hash()) + kGolden;
  return RngStream(k);
}

double RngStream::uniform01() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  std::normal_distribution<double> dist;
  return dist(*this);
}

Vector RngStream::gaussian(Eigen::Index d, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Vector out(d);
  for (Eigen::Index j = 0; j < d; ++j) out[j] = dist(*this);
  return out;
}

RngStream derive_stream(std::uint64_t master_seed,
                        std::initializer_list<PathLabel> path) {
  return RngStream(PathLabel::mix(master_seed ^ 0x243f6a8885a308d3ULL))
      .derive(path);
}

}  // namespace normef
