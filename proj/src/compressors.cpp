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
#include "normef/compressors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

namespace normef {

CompressorSpec CompressorSpec::identity(std::size_t d) {
  CompressorSpec s{CompressorKind::Identity, d, d};
  s.validate();
  return s;
}

CompressorSpec CompressorSpec::top_k(std::size_t k, std::size_t d) {
  CompressorSpec s{CompressorKind::TopK, k, d};
  s.validate();
  return s;
}

CompressorSpec CompressorSpec::rand_k(std::size_t k, std::size_t d) {
  CompressorSpec s{CompressorKind::RandK, k, d};
  s.validate();
  return s;
}

CompressorSpec CompressorSpec::from_fraction(CompressorKind kind,
                                             double fraction, std::size_t d) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("compressor", "fraction must lie in (0, 1]");
  if (kind == CompressorKind::Identity) return identity(d);
  auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(d)));
  k = std::max<std::size_t>(1, k);
  return kind == CompressorKind::TopK ? top_k(k, d) : rand_k(k, d);
}

CompressorSpec CompressorSpec::parse(std::string_view text, std::size_t d) {
  if (text == "identity") return identity(d);
  auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw ConfigError("compressor", "expected identity, topk:<fraction> or "
                                    "randk:<fraction>, got '" +
                                        std::string(text) + "'");
  std::string_view name = text.substr(0, colon);
  std::string arg(text.substr(colon + 1));
  CompressorKind kind;
  if (name == "topk")
    kind = CompressorKind::TopK;
  else if (name == "randk")
    kind = CompressorKind::RandK;
  else
    throw ConfigError("compressor", "unknown compressor '" + std::string(name) +
                                        "'");
  double fraction = 0.0;
  auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), fraction);
  if (ec != std::errc() || ptr != arg.data() + arg.size())
    throw ConfigError("compressor", "malformed fraction '" + arg + "'");
  return from_fraction(kind, fraction, d);
}

void CompressorSpec::validate() const {
  if (d == 0) throw ConfigError("compressor", "dimension must be positive");
  if (kind != CompressorKind::Identity && (k < 1 || k > d))
    throw ConfigError("compressor", "k must satisfy 1 <= k <= d");
}

double alpha(const CompressorSpec& spec) {
  if (spec.kind == CompressorKind::Identity) return 1.0;
  return static_cast<double>(spec.k) / static_cast<double>(spec.d);
}

std::string to_string(const CompressorSpec& spec) {
  switch (spec.kind) {
    case CompressorKind::Identity:
      return "identity";
    case CompressorKind::TopK:
      return "topk(k=" + std::to_string(spec.k) + ",d=" + std::to_string(spec.d) + ")";
    case CompressorKind::RandK:
      return "randk(k=" + std::to_string(spec.k) + ",d=" + std::to_string(spec.d) + ")";
  }
  return "?";
}

namespace {

CompressedMessage gather(const Vector& v, std::vector<std::uint32_t> indices) {
  std::sort(indices.begin(), indices.end());
  CompressedMessage msg;
  msg.d = static_cast<std::size_t>(v.size());
  msg.values.reserve(indices.size());
  for (auto i : indices) msg.values.push_back(v[i]);
  msg.indices = std::move(indices);
  return msg;
}

}  // namespace

CompressedMessage compress(const CompressorSpec& spec, const Vector& v,
                           RngStream& rng) {
  check_dimension("compress", static_cast<Eigen::Index>(spec.d), v.size());
  std::vector<std::uint32_t> all(spec.d);
  std::iota(all.begin(), all.end(), 0u);

  switch (spec.kind) {
    case CompressorKind::Identity:
      return gather(v, std::move(all));

    case CompressorKind::TopK: {
      // Larger magnitude first; equal magnitudes prefer the lower index.
      auto before = [&v](std::uint32_t a, std::uint32_t b) {
        double ma = std::abs(v[a]), mb = std::abs(v[b]);
        return ma > mb || (ma == mb && a < b);
      };
      std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(spec.k) - 1,
                       all.end(), before);
      all.resize(spec.k);
      return gather(v, std::move(all));
    }

    case CompressorKind::RandK: {
      // Partial Fisher-Yates: the first k slots are a uniform k-subset.
      for (std::size_t i = 0; i < spec.k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, spec.d - 1);
        std::swap(all[i], all[pick(rng)]);
      }
      all.resize(spec.k);
      return gather(v, std::move(all));
    }
  }
  throw ConfigError("compressor", "unknown kind");
}

Vector densify(const CompressedMessage& msg) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(msg.d));
  accumulate(msg, 1.0, out);
  return out;
}

void accumulate(const CompressedMessage& msg, double scale, Vector& target) {
  check_dimension("accumulate", static_cast<Eigen::Index>(msg.d), target.size());
  for (std::size_t j = 0; j < msg.indices.size(); ++j)
    target[msg.indices[j]] += scale * msg.values[j];
}

double contraction_gap(const CompressorSpec& spec, const Vector& v,
                       RngStream& rng) {
  double energy = v.squaredNorm();
  if (energy == 0.0)
    throw std::domain_error("contraction_gap: ratio undefined for zero vector");
  Vector residual = v - densify(compress(spec, v, rng));
  return residual.squaredNorm() / energy;
}

std::uint64_t payload_bits(const CompressedMessage& msg) {
  if (msg.dense()) return msg.d * kValueBits;
  return msg.indices.size() * (kIndexBits + kValueBits);
}

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  auto raw = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(raw.begin(), raw.end());
  std::copy(raw.begin(), raw.end(), bytes);
  out.write(bytes, sizeof(T));
}

template <typename T>
bool get_le(std::istream& in, T& value) {
  std::array<unsigned char, sizeof(T)> raw;
  if (!in.read(reinterpret_cast<char*>(raw.data()), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(raw.begin(), raw.end());
  value = std::bit_cast<T>(raw);
  return true;
}

}  // namespace

void write_message(std::ostream& out, const CompressedMessage& msg) {
  put_le(out, static_cast<std::uint32_t>(msg.d));
  put_le(out, static_cast<std::uint32_t>(msg.indices.size()));
  for (auto i : msg.indices) put_le(out, i);
  for (double x : msg.values) put_le(out, x);
}

bool read_message(std::istream& in, CompressedMessage& msg) {
  std::uint32_t d = 0, count = 0;
  if (!get_le(in, d)) return false;
  if (!get_le(in, count) || count > d)
    throw std::runtime_error("read_message: truncated or corrupt header");
  msg.d = d;
  msg.indices.resize(count);
  msg.values.resize(count);
  for (auto& i : msg.indices)
    if (!get_le(in, i)) throw std::runtime_error("read_message: truncated indices");
  for (auto& x : msg.values)
    if (!get_le(in, x)) throw std::runtime_error("read_message: truncated values");
  return true;
}

}  // namespace normef
