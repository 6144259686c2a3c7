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
#ifndef NORMEF_ENGINE_HPP
#define NORMEF_ENGINE_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "normef/compressors.hpp"
#include "normef/momentum.hpp"
#include "normef/problems.hpp"
#include "normef/schedules.hpp"

namespace normef {

struct RunConfig {
  MomentumKind kind = MomentumKind::SGDM;
  Schedule schedule = Schedule::decreasing(MomentumKind::SGDM);
  std::string compressor = "topk:0.1";
  ProblemSpec problem;
  std::size_t n = 10;
  std::size_t d = 100;
  std::size_t T = 1000;
  std::uint64_t master_seed = 0;
  /// false runs the non-normalized EF21 baseline x' = x - gamma g.
  bool normalized = true;
  bool rhm_independent_batch = false;
  std::size_t record_stride = 1;
  /// Worker threads for the client phase of each round; 1 = sequential.
  std::size_t threads = 1;
  /// Starting point; empty means N(0, init_scale^2 I/d) drawn from the
  /// master seed.
  std::optional<Vector> x0;
  double init_scale = 1.0;
  /// When nonempty, every compressed message is appended to this file.
  std::string trace_messages;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  CompressorSpec compressor_spec() const;
  bool stochastic() const {
    return problem.noise.sigma_g > 0.0 || problem.noise.sigma_h > 0.0;
  }
};

struct ClientState {
  Vector g;  // EF21 memory g_i, mirrored by the server
  MomentumState momentum;
  OracleCounts calls;
};

struct ServerState {
  Vector x;
  Vector g;  // (1/n) sum_i g_i, maintained incrementally
  std::size_t t = 0;
  std::uint64_t cumulative_bits = 0;
};

/// Telemetry for iterate x^t, taken before step t is applied.
struct MetricsRecord {
  std::size_t t = 0;
  double grad_norm = 0.0;  // ||grad f(x^t)||
  double f_value = 0.0;
  double V = 0.0;  // (1/n) sum ||g_i - v_i||
  double U = 0.0;  // (1/n) sum ||v_i - grad f_i(x^t)||
  double gamma = 0.0;
  double eta = 0.0;
  std::uint64_t cumulative_bits = 0;
  double momentum_error = 0.0;  // ||mean_i v_i - grad f(x^t)||, not exported

  // Running aggregates over every step s < t, recorded or not. In-memory only.
  double weighted_grad_sum = 0.0;  // sum gamma_s ||grad f(x^s)||
  double gamma_sum = 0.0;          // sum gamma_s
  double grad_min = 0.0;           // min ||grad f(x^s)||, +inf when t = 0
};

struct Executor;

struct EngineState {
  ProblemPtr problem;
  CompressorSpec compressor;
  ServerState server;
  std::vector<ClientState> clients;
  std::shared_ptr<Executor> executor;
};

/// Receives per-client artifacts of a round in fixed client order.
class StepObserver {
 public:
  virtual ~StepObserver() = default;
  virtual bool wants_tapes() const { return false; }
  virtual void on_oracle_tape(std::size_t /*client*/, std::size_t /*t*/,
                              const OracleTape& /*tape*/) {}
  virtual void on_message(std::size_t /*client*/, std::size_t /*t*/,
                          const CompressedMessage& /*msg*/) {}
};

Vector standard_initial_point(const RunConfig& config);

/// x^0 from config, v_i^0 = g_i^0 = grad f_i(x^0), g^0 = mean of g_i^0.
EngineState init(const RunConfig& config);
EngineState init(const RunConfig& config, ProblemPtr problem);

/// One round: normalized server step, momentum update on every client,
/// compression of v_i - g_i, and ordered aggregation on the server.
/// If ||g^t|| = 0 the server does not move.
void advance(EngineState& state, const RunConfig& config,
             StepObserver* observer = nullptr);

MetricsRecord measure(const EngineState& state, const RunConfig& config);

/// advance() followed by measure() at index t+1.
MetricsRecord step(EngineState& state, const RunConfig& config,
                   StepObserver* observer = nullptr);

/// ||g - (1/n) sum_i g_i|| for the current state.
double mirror_gap(const EngineState& state);

struct Trajectory {
  std::vector<MetricsRecord> records;  // t = 0, stride, 2 stride, ..., T
  std::size_t horizon = 0;             // T
  std::size_t stride = 1;
  bool stochastic = false;
  bool normalized = true;
  /// True when the running aggregates in each record are filled in, which
  /// makes prefix statistics exact at any stride.
  bool prefix_sums = false;

  /// Records eligible as output iterates (t < T).
  std::span<const MetricsRecord> candidates() const;
};

struct RunResult {
  Trajectory trajectory;
  std::vector<double> gammas;  // gamma_0 .. gamma_{T-1}
  std::size_t output_index = 0;
  Vector x_output;
  Vector x_final;
  std::vector<OracleCounts> oracle_calls;  // per client
};

/// Draws t in [0, T) with probability gammas[t] / sum(gammas).
std::size_t select_output(std::span<const double> gammas, RngStream& rng);

RunResult run(const RunConfig& config);
RunResult run(const RunConfig& config, ProblemPtr problem,
              StepObserver* observer = nullptr);

/// Independent centralized normalized-momentum loop (no memories, no
/// compression). Requires n = 1 and the identity compressor. Returns
/// x^0, ..., x^T.
std::vector<Vector> run_centralized_reference(const RunConfig& config,
                                              ProblemPtr problem);
std::vector<Vector> run_centralized_reference(const RunConfig& config);

}  // namespace normef

#endif  // NORMEF_ENGINE_HPP
