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
#include "normef/momentum.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>

namespace normef {

std::string_view to_string(MomentumKind kind) {
  switch (kind) {
    case MomentumKind::SGDM: return "sgdm";
    case MomentumKind::IGT: return "igt";
    case MomentumKind::RHM: return "rhm";
    case MomentumKind::HM: return "hm";
    case MomentumKind::MVR: return "mvr";
  }
  return "?";
}

MomentumKind parse_momentum_kind(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (MomentumKind kind : kAllMomentumKinds)
    if (lower == to_string(kind)) return kind;
  throw ConfigError("method", "unknown method '" + std::string(text) +
                                  "'; valid kinds: sgdm, igt, rhm, hm, mvr");
}

RngStream minibatch_stream(std::uint64_t master_seed, std::size_t client,
                           std::size_t t) {
  return derive_stream(master_seed, {"minibatch", client, t});
}

ClientOracle::ClientOracle(const Problem& problem, std::size_t client,
                           RngStream minibatch, OracleCounts* counts,
                           OracleTape* tape)
    : problem_(problem),
      client_(client),
      minibatch_(minibatch),
      counts_(counts),
      tape_(tape) {}

Vector ClientOracle::record_grad(Vector g) {
  if (counts_) ++counts_->grads;
  if (tape_) tape_->grads.push_back(g);
  return g;
}

Vector ClientOracle::record_hvp(Vector h) {
  if (counts_) ++counts_->hvps;
  if (tape_) tape_->hvps.push_back(h);
  return h;
}

Vector ClientOracle::grad(const Vector& x) {
  return record_grad(stoch_grad(problem_, client_, x, minibatch_.derive("grad")));
}

Vector ClientOracle::hvp(const Vector& x, const Vector& u) {
  return record_hvp(stoch_hvp(problem_, client_, x, u, minibatch_.derive("hvp")));
}

Vector ClientOracle::hvp_independent(const Vector& x, const Vector& u) {
  return record_hvp(
      stoch_hvp(problem_, client_, x, u, minibatch_.derive({"independent", "hvp"})));
}

double ClientOracle::interpolation_weight() {
  return minibatch_.derive("q").uniform01();
}

MomentumState update_momentum(MomentumKind kind, const MomentumState& state,
                              ClientOracle& oracle, const Vector& x_prev,
                              const Vector& x_next, double eta,
                              const MomentumOptions& options) {
  if (!(eta > 0.0 && eta <= 1.0))
    throw ConfigError("eta", "momentum parameter must lie in (0, 1]");
  check_dimension("momentum state", x_next.size(), state.v.size());
  check_dimension("x_prev", x_next.size(), x_prev.size());

  const double keep = 1.0 - eta;
  MomentumState out;
  switch (kind) {
    case MomentumKind::SGDM: {
      Vector g = oracle.grad(x_next);
      out.v = keep * state.v + eta * g;
      break;
    }
    case MomentumKind::IGT: {
      Vector y = x_next + (keep / eta) * (x_next - x_prev);
      Vector g = oracle.grad(y);
      out.v = keep * state.v + eta * g;
      break;
    }
    case MomentumKind::RHM: {
      const double q = oracle.interpolation_weight();
      Vector x_hat = q * x_next + (1.0 - q) * x_prev;
      Vector step = x_next - x_prev;
      Vector g = oracle.grad(x_next);
      Vector h = options.rhm_independent_batch ? oracle.hvp_independent(x_hat, step)
                                               : oracle.hvp(x_hat, step);
      Vector corrected = state.v + h;
      out.v = keep * corrected + eta * g;
      break;
    }
    case MomentumKind::HM: {
      Vector step = x_next - x_prev;
      Vector g = oracle.grad(x_next);
      Vector h = oracle.hvp(x_next, step);
      Vector corrected = state.v + h;
      out.v = keep * corrected + eta * g;
      break;
    }
    case MomentumKind::MVR: {
      Vector g_next = oracle.grad(x_next);
      Vector g_prev = oracle.grad(x_prev);
      Vector corrected = state.v + g_next - g_prev;
      out.v = keep * corrected + eta * g_next;
      break;
    }
  }
  return out;
}

MomentumState update_momentum(MomentumKind kind, const MomentumState& state,
                              const Problem& problem, std::size_t client,
                              const Vector& x_prev, const Vector& x_next,
                              double eta, const RngStream& minibatch,
                              const MomentumOptions& options) {
  ClientOracle oracle(problem, client, minibatch);
  return update_momentum(kind, state, oracle, x_prev, x_next, eta, options);
}

OracleCounts oracle_budget(MomentumKind kind) {
  switch (kind) {
    case MomentumKind::SGDM:
    case MomentumKind::IGT:
      return {1, 0};
    case MomentumKind::MVR:
      return {2, 0};
    case MomentumKind::RHM:
    case MomentumKind::HM:
      return {1, 1};
  }
  return {};
}

Vector replay_oracle(MomentumKind kind, std::span<const OracleTape> tapes,
                     std::span<const double> etas, const Vector& v0) {
  if (tapes.size() != etas.size())
    throw std::invalid_argument("replay_oracle: " + std::to_string(tapes.size()) +
                                " tapes but " + std::to_string(etas.size()) + " etas");
  const OracleCounts budget = oracle_budget(kind);
  const auto d = v0.size();
  Vector v = v0;
  for (std::size_t t = 0; t < tapes.size(); ++t) {
    const OracleTape& tape = tapes[t];
    if (tape.grads.size() != budget.grads || tape.hvps.size() != budget.hvps)
      throw std::invalid_argument("replay_oracle: step " + std::to_string(t) +
                                  " does not match the " + std::string(to_string(kind)) +
                                  " call pattern");
    for (const auto& g : tape.grads) check_dimension("replay gradient", d, g.size());
    for (const auto& h : tape.hvps) check_dimension("replay hvp", d, h.size());

    const double eta = etas[t];
    const double keep = 1.0 - eta;
    Vector next(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      double base = v[j];
      switch (kind) {
        case MomentumKind::SGDM:
        case MomentumKind::IGT:
          break;
        case MomentumKind::RHM:
        case MomentumKind::HM:
          base = base + tape.hvps[0][j];
          break;
        case MomentumKind::MVR:
          base = (base + tape.grads[0][j]) - tape.grads[1][j];
          break;
      }
      next[j] = keep * base + eta * tape.grads[0][j];
    }
    v = std::move(next);
  }
  return v;
}

}  // namespace normef
