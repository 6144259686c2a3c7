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

#include <cmath>

#include <gtest/gtest.h>

namespace normef {
namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

ProblemPtr half_norm(std::size_t d) {
  return std::make_shared<QuadraticProblem>(std::vector<Matrix>{Matrix::Identity(d, d)},
                                            std::vector<Vector>{Vector::Zero(d)});
}

RunConfig small_config(MomentumKind kind = MomentumKind::SGDM) {
  RunConfig c;
  c.kind = kind;
  c.schedule = Schedule::decreasing(kind);
  c.n = 4;
  c.d = 12;
  c.T = 60;
  c.master_seed = 21;
  c.problem.seed = 21;
  c.problem.noise = {0.2, 0.2};
  return c;
}

class Recorder : public StepObserver {
 public:
  bool wants_tapes() const override { return true; }
  void on_oracle_tape(std::size_t client, std::size_t, const OracleTape& tape) override {
    tapes.resize(std::max(tapes.size(), client + 1));
    tapes[client].push_back(tape);
  }
  void on_message(std::size_t, std::size_t, const CompressedMessage& msg) override {
    messages.push_back(msg);
  }
  std::vector<std::vector<OracleTape>> tapes;
  std::vector<CompressedMessage> messages;
};

TEST(Init, SingleClientStartsAtGradient) {
  RunConfig c = small_config();
  c.n = 1;
  c.d = 2;
  c.x0 = vec({1, 0});
  c.compressor = "identity";
  EngineState s = init(c, half_norm(2));
  EXPECT_EQ(s.server.g, vec({1, 0}));
  const MetricsRecord r = measure(s, c);
  EXPECT_EQ(r.V, 0.0);
  EXPECT_EQ(r.U, 0.0);
  EXPECT_EQ(r.t, 0u);
}

TEST(Init, ServerAveragesClientGradients) {
  // Gradients at x0 = 0 are e_1 and e_2.
  auto p = std::make_shared<QuadraticProblem>(
      std::vector<Matrix>{Matrix::Identity(2, 2), Matrix::Identity(2, 2)},
      std::vector<Vector>{vec({-1, 0}), vec({0, -1})});
  RunConfig c = small_config();
  c.n = 2;
  c.d = 2;
  c.x0 = vec({0, 0});
  EngineState s = init(c, p);
  EXPECT_EQ(s.server.g, vec({0.5, 0.5}));
}

TEST(Init, Deterministic) {
  const RunConfig c = small_config();
  EngineState a = init(c), b = init(c);
  EXPECT_EQ(a.server.x, b.server.x);
  EXPECT_EQ(a.server.g, b.server.g);
}

TEST(Init, RejectsMismatchedProblem) {
  RunConfig c = small_config();
  EXPECT_THROW(init(c, half_norm(3)), ConfigError);
}

TEST(Step, HandSimulatedIteration) {
  RunConfig c = small_config();
  c.n = 1;
  c.d = 2;
  c.x0 = vec({1, 0});
  c.compressor = "identity";
  c.problem.noise = {};
  c.schedule = Schedule::constant(0.1, 1.0);
  EngineState s = init(c, half_norm(2));
  Recorder rec;
  step(s, c, &rec);
  EXPECT_LT((s.server.x - vec({0.9, 0})).norm(), 1e-15);
  EXPECT_LT((s.clients[0].momentum.v - vec({0.9, 0})).norm(), 1e-15);
  EXPECT_LT((s.clients[0].g - vec({0.9, 0})).norm(), 1e-15);
  EXPECT_LT((s.server.g - vec({0.9, 0})).norm(), 1e-15);
  ASSERT_EQ(rec.messages.size(), 1u);
  EXPECT_LT((densify(rec.messages[0]) - vec({-0.1, 0})).norm(), 1e-15);
}

TEST(Step, StationaryStartDoesNotMove) {
  RunConfig c = small_config();
  c.n = 1;
  c.d = 3;
  c.x0 = Vector::Zero(3);
  c.problem.noise = {};
  EngineState s = init(c, half_norm(3));
  for (int k = 0; k < 5; ++k) advance(s, c);
  EXPECT_EQ(s.server.x, Vector::Zero(3));
}

TEST(Step, NormalizedStepHasLengthGamma) {
  const RunConfig c = small_config(MomentumKind::MVR);
  EngineState s = init(c);
  for (std::size_t t = 0; t < 30; ++t) {
    const Vector before = s.server.x;
    advance(s, c);
    EXPECT_NEAR((s.server.x - before).norm(), gamma_at(c.schedule, t), 1e-14);
  }
}

TEST(Step, BaselineStepIsUnnormalized) {
  RunConfig c = small_config();
  c.normalized = false;
  c.schedule = Schedule::constant(0.05, 0.5);
  EngineState s = init(c);
  const Vector x = s.server.x, g = s.server.g;
  advance(s, c);
  EXPECT_LT((s.server.x - (x - 0.05 * g)).norm(), 1e-15);
}

TEST(Step, ServerMirrorsClientMemories) {
  RunConfig c = small_config(MomentumKind::HM);
  c.compressor = "topk:0.1";
  EngineState s = init(c);
  for (int t = 0; t < 200; ++t) {
    advance(s, c);
    double scale = s.server.g.norm();
    for (const auto& cl : s.clients) scale = std::max(scale, cl.g.norm());
    ASSERT_LE(mirror_gap(s), 1e-9 * std::max(scale, 1.0));
  }
}

TEST(Step, DivergenceReportsStep) {
  RunConfig c = small_config();
  c.normalized = false;
  c.schedule = Schedule::constant(1e150, 1.0);
  c.problem.noise = {};
  c.T = 100;
  try {
    run(c);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_GT(e.step(), 0u);
    EXPECT_LT(e.step(), 100u);
  }
}

TEST(Run, RecordsEveryStrideAndFinalStep) {
  RunConfig c = small_config();
  c.T = 25;
  c.record_stride = 10;
  const RunResult r = run(c);
  std::vector<std::size_t> ts;
  for (const auto& rec : r.trajectory.records) ts.push_back(rec.t);
  EXPECT_EQ(ts, (std::vector<std::size_t>{0, 10, 20, 25}));
  c.record_stride = 1;
  EXPECT_EQ(run(c).trajectory.records.size(), 26u);
}

TEST(Run, PrefixSumsCoverEveryStep) {
  RunConfig c = small_config();
  c.record_stride = 1;
  const RunResult full = run(c);
  double num = 0.0, den = 0.0, low = INFINITY;
  for (const auto& r : full.trajectory.records) {
    EXPECT_NEAR(r.weighted_grad_sum, num, 1e-12 * std::max(1.0, num));
    EXPECT_NEAR(r.gamma_sum, den, 1e-12 * std::max(1.0, den));
    if (r.t > 0) EXPECT_EQ(r.grad_min, low);
    num += r.gamma * r.grad_norm;
    den += r.gamma;
    low = std::min(low, r.grad_norm);
  }
  c.record_stride = 7;
  const RunResult strided = run(c);
  EXPECT_EQ(strided.trajectory.records.back().weighted_grad_sum,
            full.trajectory.records.back().weighted_grad_sum);
}

TEST(Run, OutputIterateMatchesIndex) {
  RunConfig c = small_config();
  const RunResult r = run(c);
  ASSERT_LT(r.output_index, c.T);
  EngineState s = init(c);
  for (std::size_t t = 0; t < r.output_index; ++t) advance(s, c);
  EXPECT_EQ(s.server.x, r.x_output);
}

TEST(Run, OracleCallsFollowBudget) {
  for (MomentumKind kind : kAllMomentumKinds) {
    const RunConfig c = small_config(kind);
    const RunResult r = run(c);
    for (const OracleCounts& calls : r.oracle_calls) {
      EXPECT_EQ(calls.grads, c.T * oracle_budget(kind).grads);
      EXPECT_EQ(calls.hvps, c.T * oracle_budget(kind).hvps);
    }
  }
}

TEST(Run, ThreadedMatchesSequential) {
  RunConfig c = small_config(MomentumKind::RHM);
  const RunResult a = run(c);
  c.threads = 4;
  const RunResult b = run(c);
  EXPECT_EQ(a.x_final, b.x_final);
  ASSERT_EQ(a.trajectory.records.size(), b.trajectory.records.size());
  for (std::size_t k = 0; k < a.trajectory.records.size(); ++k)
    EXPECT_EQ(a.trajectory.records[k].grad_norm, b.trajectory.records[k].grad_norm);
}

TEST(Run, TapesReplayToClientMomentum) {
  for (MomentumKind kind : {MomentumKind::SGDM, MomentumKind::MVR, MomentumKind::RHM}) {
    const RunConfig c = small_config(kind);
    EngineState s = init(c);
    const Vector v0 = s.clients[2].momentum.v;
    Recorder rec;
    std::vector<double> etas;
    for (std::size_t t = 0; t < 10; ++t) {
      etas.push_back(eta_at(c.schedule, t));
      advance(s, c, &rec);
    }
    EXPECT_EQ(replay_oracle(kind, rec.tapes[2], etas, v0), s.clients[2].momentum.v);
  }
}

TEST(Run, IdentityCompressorHasZeroMemoryError) {
  RunConfig c = small_config(MomentumKind::IGT);
  c.compressor = "identity";
  for (const auto& r : run(c).trajectory.records) EXPECT_EQ(r.V, 0.0);
}

TEST(Run, ChargesPayloadBits) {
  RunConfig c = small_config();
  c.compressor = "topk:0.25";  // k = 3 of 12
  const RunResult r = run(c);
  EXPECT_EQ(r.trajectory.records.back().cumulative_bits, c.T * c.n * 3u * 96u);
}

class CentralizedTest : public ::testing::TestWithParam<std::tuple<MomentumKind, double>> {};

TEST_P(CentralizedTest, EngineMatchesReference) {
  const auto [kind, sigma] = GetParam();
  RunConfig c = small_config(kind);
  c.n = 1;
  c.compressor = "identity";
  c.T = 100;
  c.problem.noise = {sigma, sigma};
  ProblemPtr p = make_problem(c.problem, c.n, c.d);
  const auto ref = run_centralized_reference(c, p);
  ASSERT_EQ(ref.size(), c.T + 1);
  EngineState s = init(c, p);
  for (std::size_t t = 0; t < c.T; ++t) {
    advance(s, c);
    ASSERT_LE((s.server.x - ref[t + 1]).cwiseAbs().maxCoeff(), 1e-12) << "t = " << t;
    ASSERT_EQ(s.server.x, ref[t + 1]) << "t = " << t;
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, CentralizedTest,
                         ::testing::Combine(::testing::ValuesIn(kAllMomentumKinds),
                                            ::testing::Values(0.0, 0.1)));

TEST(Centralized, RequiresSingleClientIdentity) {
  RunConfig c = small_config();
  c.compressor = "identity";
  EXPECT_THROW(run_centralized_reference(c), ConfigError);
  c.n = 1;
  c.compressor = "topk:0.5";
  EXPECT_THROW(run_centralized_reference(c), ConfigError);
}

TEST(Centralized, TinyStepMovesAlongNegativeGradient) {
  RunConfig c = small_config();
  c.n = 1;
  c.d = 2;
  c.T = 1;
  c.compressor = "identity";
  c.x0 = vec({3, 4});
  c.problem.noise = {};
  c.schedule = Schedule::constant(1e-6, 1.0);
  const auto ref = run_centralized_reference(c, half_norm(2));
  EXPECT_LT((ref[1] - (vec({3, 4}) - 1e-6 * vec({0.6, 0.8}))).norm(), 1e-15);
}

TEST(SelectOutput, SingleStepAlwaysZero) {
  RngStream rng(1);
  const std::vector<double> g{0.3};
  for (int k = 0; k < 100; ++k) EXPECT_EQ(select_output(g, rng), 0u);
}

double chi_square(const std::vector<double>& gammas, int reps, std::uint64_t seed) {
  std::vector<double> counts(gammas.size(), 0.0);
  RngStream rng = derive_stream(seed);
  for (int k = 0; k < reps; ++k) counts[select_output(gammas, rng)] += 1.0;
  double total = 0.0;
  for (double g : gammas) total += g;
  double chi2 = 0.0;
  for (std::size_t t = 0; t < gammas.size(); ++t) {
    const double e = reps * gammas[t] / total;
    chi2 += (counts[t] - e) * (counts[t] - e) / e;
  }
  return chi2;
}

TEST(SelectOutput, UniformForConstantStepsize) {
  EXPECT_LT(chi_square(std::vector<double>(8, 0.1), 10000, 3), 18.48);  // df 7, 1%
}

TEST(SelectOutput, ProportionalToDecreasingStepsize) {
  const Schedule s = Schedule::decreasing(MomentumKind::SGDM);
  std::vector<double> g;
  for (std::size_t t = 0; t < 4; ++t) g.push_back(gamma_at(s, t));
  EXPECT_NEAR(g[1], 0.7379, 2e-4);
  EXPECT_NEAR(g[2], 0.5946, 1e-4);
  EXPECT_NEAR(g[3], 0.5030, 1e-4);
  EXPECT_LT(chi_square(g, 10000, 4), 11.34);  // df 3, 1%
}

TEST(Config, ValidationNamesField) {
  RunConfig c = small_config();
  c.compressor = "topk:2";
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.n = 0;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "clients");
  }
}

}  // namespace
}  // namespace normef
