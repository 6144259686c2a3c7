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
#include "normef/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <numeric>

#include <tbb/blocked_range.h>
#include <tbb/info.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

namespace normef {

struct Executor {
  // Capped at the available cores; the result does not depend on the count.
  explicit Executor(std::size_t threads)
      : arena(std::min(static_cast<int>(threads), tbb::info::default_concurrency())) {}
  tbb::task_arena arena;
};

void RunConfig::validate() const {
  if (n < 1) throw ConfigError("clients", "must be at least 1");
  if (d < 1) throw ConfigError("dim", "must be at least 1");
  if (T < 1) throw ConfigError("iters", "must be at least 1");
  if (record_stride < 1) throw ConfigError("record-stride", "must be at least 1");
  if (threads < 1) throw ConfigError("threads", "must be at least 1");
  schedule.validate();
  compressor_spec();
  if (!(problem.noise.sigma_g >= 0.0)) throw ConfigError("sigma-g", "must be >= 0");
  if (!(problem.noise.sigma_h >= 0.0)) throw ConfigError("sigma-h", "must be >= 0");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale))
    throw ConfigError("init-scale", "must be finite and >= 0");
  if (x0 && static_cast<std::size_t>(x0->size()) != d)
    throw ConfigError("x0", "length must equal dim");
}

CompressorSpec RunConfig::compressor_spec() const {
  return CompressorSpec::parse(compressor, d);
}

std::span<const MetricsRecord> Trajectory::candidates() const {
  auto end = std::find_if(records.begin(), records.end(),
                          [this](const MetricsRecord& r) { return r.t >= horizon; });
  return {records.data(), static_cast<std::size_t>(end - records.begin())};
}

Vector standard_initial_point(const RunConfig& config) {
  if (config.x0) return *config.x0;
  return derive_stream(config.master_seed, {"init", "x0"})
      .gaussian(static_cast<Eigen::Index>(config.d),
                config.init_scale / std::sqrt(static_cast<double>(config.d)));
}

EngineState init(const RunConfig& config) {
  config.validate();
  return init(config, make_problem(config.problem, config.n, config.d));
}

EngineState init(const RunConfig& config, ProblemPtr problem) {
  config.validate();
  if (!problem) throw ConfigError("problem", "no problem instance");
  if (problem->num_clients() != config.n)
    throw ConfigError("clients", "does not match the problem's client count");
  if (problem->dim() != config.d)
    throw ConfigError("dim", "does not match the problem's dimension");

  EngineState state;
  state.problem = std::move(problem);
  state.compressor = config.compressor_spec();
  if (config.threads > 1) state.executor = std::make_shared<Executor>(config.threads);

  state.server.x = standard_initial_point(config);
  state.server.g = Vector::Zero(static_cast<Eigen::Index>(config.d));
  state.clients.resize(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    ClientState& c = state.clients[i];
    c.momentum.v = state.problem->grad(i, state.server.x);
    c.g = c.momentum.v;
    state.server.g += c.g;
  }
  state.server.g /= static_cast<double>(config.n);
  if (!all_finite(state.server.g)) throw NumericalError(0, "non-finite initial gradient");
  return state;
}

void advance(EngineState& state, const RunConfig& config, StepObserver* observer) {
  ServerState& server = state.server;
  const std::size_t t = server.t;
  const std::size_t n = state.clients.size();
  const double gamma = gamma_at(config.schedule, t);
  const double eta = eta_at(config.schedule, t);

  Vector x_next;
  if (config.normalized) {
    const double g_norm = server.g.norm();
    x_next = g_norm > 0.0 ? Vector(server.x - (gamma / g_norm) * server.g) : server.x;
  } else {
    x_next = server.x - gamma * server.g;
  }

  const bool want_tapes = observer && observer->wants_tapes();
  std::vector<CompressedMessage> messages(n);
  std::vector<Vector> lossless(n);  // v_i, sent instead of v_i - g_i when nothing is dropped
  std::vector<OracleTape> tapes(want_tapes ? n : 0);
  const MomentumOptions options{config.rhm_independent_batch};

  auto client_round = [&](std::size_t i) {
    ClientState& c = state.clients[i];
    ClientOracle oracle(*state.problem, i, minibatch_stream(config.master_seed, i, t),
                        &c.calls, want_tapes ? &tapes[i] : nullptr);
    c.momentum = update_momentum(config.kind, c.momentum, oracle, server.x, x_next, eta,
                                 options);
    RngStream compress_rng = derive_stream(config.master_seed, {"compress", i, t});
    messages[i] = compress(state.compressor, c.momentum.v - c.g, compress_rng);
    // A full-length message is lossless, so the new memory is v itself.
    // g + (v - g) can round away from v; sending v keeps both sides exact.
    if (messages[i].dense()) {
      c.g = c.momentum.v;
      lossless[i] = c.g;
    } else {
      accumulate(messages[i], 1.0, c.g);
    }
  };

  if (state.executor && n > 1) {
    state.executor->arena.execute([&] {
      tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n),
                        [&](const tbb::blocked_range<std::size_t>& range) {
                          for (std::size_t i = range.begin(); i != range.end(); ++i)
                            client_round(i);
                        });
    });
  } else {
    for (std::size_t i = 0; i < n; ++i) client_round(i);
  }

  // Ordered reduction keeps the server update independent of scheduling.
  Vector sum = Vector::Zero(server.g.size());
  const bool dense_round = messages.front().dense();
  for (std::size_t i = 0; i < n; ++i) {
    if (dense_round)
      sum += lossless[i];
    else
      accumulate(messages[i], 1.0, sum);
    server.cumulative_bits += payload_bits(messages[i]);
    if (observer) {
      if (want_tapes) observer->on_oracle_tape(i, t, tapes[i]);
      observer->on_message(i, t, messages[i]);
    }
  }
  // Every client shares one compressor, so a round is all dense or all sparse.
  if (dense_round)
    server.g = sum / static_cast<double>(n);
  else
    server.g += sum / static_cast<double>(n);
  server.x = std::move(x_next);
  server.t = t + 1;

  if (!all_finite(server.x) || !all_finite(server.g))
    throw NumericalError(server.t, "non-finite server state");
  for (std::size_t i = 0; i < n; ++i)
    if (!all_finite(state.clients[i].momentum.v) || !all_finite(state.clients[i].g))
      throw NumericalError(server.t, "non-finite state on client " + std::to_string(i));
}

MetricsRecord measure(const EngineState& state, const RunConfig& config) {
  const ServerState& server = state.server;
  const std::size_t n = state.clients.size();
  const auto d = server.x.size();

  MetricsRecord r;
  r.t = server.t;
  r.gamma = gamma_at(config.schedule, server.t);
  r.eta = eta_at(config.schedule, server.t);
  r.cumulative_bits = server.cumulative_bits;
  r.f_value = state.problem->full_value(server.x);

  Vector grad_mean = Vector::Zero(d);
  Vector v_mean = Vector::Zero(d);
  double V = 0.0, U = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const ClientState& c = state.clients[i];
    Vector gi = state.problem->grad(i, server.x);
    V += (c.g - c.momentum.v).norm();
    U += (c.momentum.v - gi).norm();
    grad_mean += gi;
    v_mean += c.momentum.v;
  }
  grad_mean /= static_cast<double>(n);
  v_mean /= static_cast<double>(n);
  r.V = V / static_cast<double>(n);
  r.U = U / static_cast<double>(n);
  r.grad_norm = grad_mean.norm();
  r.momentum_error = (v_mean - grad_mean).norm();
  return r;
}

MetricsRecord step(EngineState& state, const RunConfig& config, StepObserver* observer) {
  advance(state, config, observer);
  return measure(state, config);
}

double mirror_gap(const EngineState& state) {
  Vector mean = Vector::Zero(state.server.g.size());
  for (const ClientState& c : state.clients) mean += c.g;
  mean /= static_cast<double>(state.clients.size());
  return (state.server.g - mean).norm();
}

std::size_t select_output(std::span<const double> gammas, RngStream& rng) {
  if (gammas.empty()) throw std::invalid_argument("select_output: empty gamma sequence");
  std::vector<double> cumulative(gammas.size());
  std::partial_sum(gammas.begin(), gammas.end(), cumulative.begin());
  const double u = rng.uniform01() * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                               gammas.size() - 1);
}

namespace {

class MessageDump final : public StepObserver {
 public:
  MessageDump(const std::string& path, StepObserver* inner)
      : out_(path, std::ios::binary), inner_(inner) {
    if (!out_) throw std::ios_base::failure("cannot open trace file '" + path + "'");
  }
  bool wants_tapes() const override { return inner_ && inner_->wants_tapes(); }
  void on_oracle_tape(std::size_t client, std::size_t t, const OracleTape& tape) override {
    if (inner_) inner_->on_oracle_tape(client, t, tape);
  }
  void on_message(std::size_t client, std::size_t t, const CompressedMessage& msg) override {
    write_message(out_, msg);
    if (!out_) throw std::ios_base::failure("write to trace file failed");
    if (inner_) inner_->on_message(client, t, msg);
  }

 private:
  std::ofstream out_;
  StepObserver* inner_;
};

}  // namespace

RunResult run(const RunConfig& config) {
  config.validate();
  return run(config, make_problem(config.problem, config.n, config.d));
}

RunResult run(const RunConfig& config, ProblemPtr problem, StepObserver* observer) {
  EngineState state = init(config, std::move(problem));

  std::unique_ptr<MessageDump> dump;
  if (!config.trace_messages.empty()) {
    dump = std::make_unique<MessageDump>(config.trace_messages, observer);
    observer = dump.get();
  }

  RunResult result;
  result.gammas.resize(config.T);
  for (std::size_t t = 0; t < config.T; ++t) result.gammas[t] = gamma_at(config.schedule, t);
  // The stepsizes do not depend on the iterates, so the output index can be
  // drawn up front and x captured when the loop reaches it.
  RngStream output_rng = derive_stream(config.master_seed, {"output"});
  result.output_index = select_output(result.gammas, output_rng);

  Trajectory& traj = result.trajectory;
  traj.horizon = config.T;
  traj.stride = config.record_stride;
  traj.stochastic = config.stochastic();
  traj.normalized = config.normalized;
  traj.records.reserve(config.T / config.record_stride + 2);

  traj.prefix_sums = true;

  double weighted_sum = 0.0, gamma_sum = 0.0;
  double grad_min = std::numeric_limits<double>::infinity();
  traj.records.push_back(measure(state, config));
  traj.records.back().grad_min = grad_min;
  for (std::size_t t = 0; t < config.T; ++t) {
    if (t == result.output_index) result.x_output = state.server.x;
    const bool recorded = !traj.records.empty() && traj.records.back().t == t;
    const double grad_norm = recorded ? traj.records.back().grad_norm
                                      : state.problem->full_grad(state.server.x).norm();
    weighted_sum += result.gammas[t] * grad_norm;
    gamma_sum += result.gammas[t];
    grad_min = std::min(grad_min, grad_norm);

    advance(state, config, observer);
    const std::size_t next = t + 1;
    if (next % config.record_stride == 0 || next == config.T) {
      MetricsRecord r = measure(state, config);
      r.weighted_grad_sum = weighted_sum;
      r.gamma_sum = gamma_sum;
      r.grad_min = grad_min;
      traj.records.push_back(r);
    }
  }
  result.x_final = state.server.x;
  for (const ClientState& c : state.clients) result.oracle_calls.push_back(c.calls);
  return result;
}

std::vector<Vector> run_centralized_reference(const RunConfig& config) {
  config.validate();
  return run_centralized_reference(config, make_problem(config.problem, config.n, config.d));
}

std::vector<Vector> run_centralized_reference(const RunConfig& config, ProblemPtr problem) {
  config.validate();
  if (config.n != 1) throw ConfigError("clients", "centralized reference requires n = 1");
  if (config.compressor_spec().kind != CompressorKind::Identity)
    throw ConfigError("compressor", "centralized reference requires the identity compressor");
  if (!problem || problem->num_clients() != 1 || problem->dim() != config.d)
    throw ConfigError("problem", "centralized reference requires a single-client problem of size dim");

  const Problem& p = *problem;
  Vector x = standard_initial_point(config);
  Vector v = p.grad(0, x);
  std::vector<Vector> iterates{x};
  iterates.reserve(config.T + 1);

  for (std::size_t t = 0; t < config.T; ++t) {
    const double gamma = gamma_at(config.schedule, t);
    const double eta = eta_at(config.schedule, t);
    Vector x_new;
    if (config.normalized) {
      const double v_norm = v.norm();
      x_new = v_norm > 0.0 ? Vector(x - (gamma / v_norm) * v) : x;
    } else {
      x_new = x - gamma * v;
    }

    RngStream batch = minibatch_stream(config.master_seed, 0, t);
    const Vector delta = x_new - x;
    switch (config.kind) {
      case MomentumKind::SGDM:
        v = (1.0 - eta) * v + eta * stoch_grad(p, 0, x_new, batch.derive("grad"));
        break;
      case MomentumKind::IGT: {
        const Vector y = x_new + ((1.0 - eta) / eta) * delta;
        v = (1.0 - eta) * v + eta * stoch_grad(p, 0, y, batch.derive("grad"));
        break;
      }
      case MomentumKind::RHM: {
        const double q = batch.derive("q").uniform01();
        const Vector x_hat = q * x_new + (1.0 - q) * x;
        const RngStream hvp_batch = config.rhm_independent_batch
                                        ? batch.derive({"independent", "hvp"})
                                        : batch.derive("hvp");
        const Vector g = stoch_grad(p, 0, x_new, batch.derive("grad"));
        v = (1.0 - eta) * (v + stoch_hvp(p, 0, x_hat, delta, hvp_batch)) + eta * g;
        break;
      }
      case MomentumKind::HM: {
        const Vector g = stoch_grad(p, 0, x_new, batch.derive("grad"));
        v = (1.0 - eta) * (v + stoch_hvp(p, 0, x_new, delta, batch.derive("hvp"))) + eta * g;
        break;
      }
      case MomentumKind::MVR: {
        const Vector g_new = stoch_grad(p, 0, x_new, batch.derive("grad"));
        const Vector g_old = stoch_grad(p, 0, x, batch.derive("grad"));
        v = (1.0 - eta) * (v + g_new - g_old) + eta * g_new;
        break;
      }
    }
    x = x_new;
    iterates.push_back(x);
  }
  return iterates;
}

}  // namespace normef
