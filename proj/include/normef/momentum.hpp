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
#ifndef NORMEF_MOMENTUM_HPP
#define NORMEF_MOMENTUM_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "normef/core.hpp"
#include "normef/problems.hpp"
#include "normef/rng.hpp"

namespace normef {

enum class MomentumKind { SGDM, IGT, RHM, HM, MVR };

inline constexpr std::array<MomentumKind, 5> kAllMomentumKinds = {
    MomentumKind::SGDM, MomentumKind::IGT, MomentumKind::RHM, MomentumKind::HM,
    MomentumKind::MVR};

std::string_view to_string(MomentumKind kind);
/// Accepts sgdm|igt|rhm|hm|mvr (case-insensitive).
MomentumKind parse_momentum_kind(std::string_view text);

struct MomentumState {
  Vector v;
};

struct OracleCounts {
  std::uint64_t grads = 0;
  std::uint64_t hvps = 0;
};

/// Raw oracle outputs of one update, in call order.
struct OracleTape {
  std::vector<Vector> grads;
  std::vector<Vector> hvps;
};

/// The minibatch xi_i^{t+1} for client i at step t.
RngStream minibatch_stream(std::uint64_t master_seed, std::size_t client,
                           std::size_t t);

/// Stochastic oracle for one client and one minibatch. Every grad() call
/// replays the same noise draw, and so does every hvp() call, which realizes
/// evaluating several points on a shared minibatch.
class ClientOracle {
 public:
  ClientOracle(const Problem& problem, std::size_t client, RngStream minibatch,
               OracleCounts* counts = nullptr, OracleTape* tape = nullptr);

  Vector grad(const Vector& x);
  Vector hvp(const Vector& x, const Vector& u);
  /// HVP on a second minibatch drawn independently of the first.
  Vector hvp_independent(const Vector& x, const Vector& u);
  /// q ~ U(0,1) for the randomized Hessian correction.
  double interpolation_weight();

  const Problem& problem() const { return problem_; }
  std::size_t client() const { return client_; }

 private:
  Vector record_grad(Vector g);
  Vector record_hvp(Vector h);

  const Problem& problem_;
  std::size_t client_;
  RngStream minibatch_;
  OracleCounts* counts_;
  OracleTape* tape_;
};

struct MomentumOptions {
  /// RHM only: evaluate the Hessian correction on an independent minibatch
  /// instead of sharing the gradient's minibatch.
  bool rhm_independent_batch = false;
};

/// One momentum step v_i^t -> v_i^{t+1} with x_prev = x^t, x_next = x^{t+1}.
///
///   SGDM  v' = (1-eta) v + eta g(x_next)
///   IGT   v' = (1-eta) v + eta g(y),  y = x_next + (1-eta)/eta (x_next - x_prev)
///   RHM   v' = (1-eta)(v + H(x_hat)(x_next - x_prev)) + eta g(x_next),
///         x_hat = q x_next + (1-q) x_prev,  q ~ U(0,1)
///   HM    v' = (1-eta)(v + H(x_next)(x_next - x_prev)) + eta g(x_next)
///   MVR   v' = (1-eta)(v + g(x_next) - g(x_prev)) + eta g(x_next)
///
/// Oracle calls per update: SGDM, IGT one gradient; MVR two gradients;
/// HM, RHM one gradient and one HVP.
MomentumState update_momentum(MomentumKind kind, const MomentumState& state,
                              ClientOracle& oracle, const Vector& x_prev,
                              const Vector& x_next, double eta,
                              const MomentumOptions& options = {});

MomentumState update_momentum(MomentumKind kind, const MomentumState& state,
                              const Problem& problem, std::size_t client,
                              const Vector& x_prev, const Vector& x_next,
                              double eta, const RngStream& minibatch,
                              const MomentumOptions& options = {});

/// Expected (gradients, hvps) per update.
OracleCounts oracle_budget(MomentumKind kind);

/// Re-evaluates the momentum recursion from recorded oracle outputs.
/// Throws std::invalid_argument when a tape does not match the kind's call
/// pattern or the lengths of tapes and etas differ.
Vector replay_oracle(MomentumKind kind, std::span<const OracleTape> tapes,
                     std::span<const double> etas, const Vector& v0);

}  // namespace normef

#endif  // NORMEF_MOMENTUM_HPP
