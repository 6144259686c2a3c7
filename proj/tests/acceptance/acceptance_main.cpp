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
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails. `acceptance N ...` runs only the listed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "normef/compressors.hpp"
#include "normef/engine.hpp"
#include "normef/harness.hpp"
#include "normef/momentum.hpp"
#include "normef/problems.hpp"
#include "normef/schedules.hpp"
#include "normef/trace_io.hpp"

namespace normef {
namespace {

struct Verdict {
  bool passed = true;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(4);
  s << x;
  return s.str();
}

double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// 1. Single client, identity compressor: engine iterates equal the plain
// normalized momentum method.
Verdict centralized_equivalence() {
  double worst = 0.0;
  for (MomentumKind kind : kAllMomentumKinds) {
    for (double sigma : {0.0, 0.1}) {
      RunConfig c;
      c.kind = kind;
      c.schedule = Schedule::decreasing(kind);
      c.n = 1;
      c.d = 50;
      c.T = 100;
      c.compressor = "identity";
      c.master_seed = 17;
      c.problem.seed = 17;
      c.problem.noise = {sigma, sigma};
      ProblemPtr p = make_problem(c.problem, c.n, c.d);
      const auto ref = run_centralized_reference(c, p);
      EngineState s = init(c, p);
      for (std::size_t t = 0; t < c.T; ++t) {
        advance(s, c);
        worst = std::max(worst, max_abs(s.server.x - ref[t + 1]));
      }
    }
  }
  return {worst <= 1e-12, "max deviation " + fmt(worst)};
}

// 2. TopK contraction holds exactly; RandK matches it in expectation.
Verdict compressor_contraction() {
  RngStream rng = derive_stream(2, {"acceptance", "vectors"});
  double topk_excess = -1.0;
  double worst_z = 0.0;
  for (std::size_t d : {10u, 50u, 200u}) {
    for (std::size_t k : {std::size_t{1}, d / 10, d / 2, d - 1}) {
      if (k == 0) continue;
      const CompressorSpec top = CompressorSpec::top_k(k, d);
      const double bound = 1.0 - alpha(top);
      for (int r = 0; r < 1000; ++r) {
        const Vector v = rng.gaussian(static_cast<Eigen::Index>(d), 1.0);
        topk_excess = std::max(topk_excess, contraction_gap(top, v, rng) - bound);
      }
      const CompressorSpec rnd = CompressorSpec::rand_k(k, d);
      const Vector v = rng.gaussian(static_cast<Eigen::Index>(d), 1.0);
      const int draws = 10000;
      double sum = 0.0, sum2 = 0.0;
      for (int r = 0; r < draws; ++r) {
        const double g = contraction_gap(rnd, v, rng);
        sum += g;
        sum2 += g * g;
      }
      const double mean = sum / draws;
      const double var = std::max(sum2 / draws - mean * mean, 0.0);
      const double se = std::sqrt(var / (draws - 1));
      const double expected = 1.0 - alpha(rnd);
      const double z = se > 0.0 ? std::abs(mean - expected) / se
                                : (std::abs(mean - expected) < 1e-12 ? 0.0 : 1e9);
      worst_z = std::max(worst_z, z);
    }
  }
  const bool ok = topk_excess <= 1e-12 && worst_z <= 3.0;
  return {ok, "topk max excess " + fmt(topk_excess) + ", randk max |z| " + fmt(worst_z)};
}

// 3. Momentum unit behavior: eta = 1 collapse, exact gradient tracking on
// noiseless quadratics, Hessian-vector products against finite differences.
Verdict momentum_units() {
  ProblemSpec spec;
  spec.seed = 3;
  spec.noise = {0.1, 0.1};
  ProblemPtr noisy = make_problem(spec, 3, 20);
  RngStream rng = derive_stream(3, {"acceptance", "points"});
  double collapse = 0.0;
  for (int r = 0; r < 20; ++r) {
    const Vector x_prev = rng.gaussian(20, 1.0);
    const Vector x_next = rng.gaussian(20, 1.0);
    const MomentumState state{rng.gaussian(20, 1.0)};
    const RngStream mb = minibatch_stream(3, 1, static_cast<std::size_t>(r));
    for (MomentumKind kind : kAllMomentumKinds) {
      const MomentumState next = update_momentum(kind, state, *noisy, 1, x_prev, x_next, 1.0, mb);
      ClientOracle oracle(*noisy, 1, mb);
      collapse = std::max(collapse, max_abs(next.v - oracle.grad(x_next)));
    }
  }

  double tracking = 0.0;
  for (MomentumKind kind : {MomentumKind::HM, MomentumKind::RHM, MomentumKind::MVR}) {
    RunConfig c;
    c.kind = kind;
    c.schedule = Schedule::decreasing(kind);
    c.n = 4;
    c.d = 20;
    c.T = 100;
    c.master_seed = 3;
    c.problem.seed = 3;
    c.problem.noise = {};
    EngineState s = init(c);
    for (std::size_t t = 0; t < c.T; ++t) {
      advance(s, c);
      for (std::size_t i = 0; i < c.n; ++i) {
        const Vector g = s.problem->grad(i, s.server.x);
        tracking = std::max(tracking, max_abs(s.clients[i].momentum.v - g) /
                                          std::max(1.0, max_abs(g)));
      }
    }
  }

  ProblemSpec lr;
  lr.generator = "logreg";
  lr.seed = 3;
  ProblemPtr logreg = make_problem(lr, 3, 10);
  double hvp_rel = 0.0;
  const double h = 1e-5;
  for (int r = 0; r < 100; ++r) {
    const std::size_t i = static_cast<std::size_t>(r) % 3;
    const Vector x = rng.gaussian(10, 1.0);
    const Vector u = rng.gaussian(10, 1.0);
    const Vector exact = logreg->hvp(i, x, u);
    const Vector fd = (logreg->grad(i, x + h * u) - logreg->grad(i, x - h * u)) / (2.0 * h);
    hvp_rel = std::max(hvp_rel, (exact - fd).norm() / std::max(exact.norm(), 1e-12));
  }
  const bool ok = collapse == 0.0 && tracking <= 1e-12 && hvp_rel <= 1e-5;
  return {ok, "collapse " + fmt(collapse) + ", tracking " + fmt(tracking) + ", hvp rel " +
                  fmt(hvp_rel)};
}

// 4. Server mirror of the client memories, and V_t = 0 without compression.
Verdict mirror_and_identity() {
  RunConfig c;
  c.kind = MomentumKind::MVR;
  c.schedule = Schedule::decreasing(c.kind);
  c.n = 10;
  c.d = 50;
  c.T = 10000;
  c.compressor = "topk:0.1";
  c.master_seed = 4;
  c.problem.seed = 4;
  c.problem.noise = {0.5, 0.5};
  EngineState s = init(c);
  double worst = 0.0;
  for (std::size_t t = 0; t < c.T; ++t) {
    advance(s, c);
    double scale = s.server.g.norm();
    for (const auto& cl : s.clients) scale = std::max(scale, cl.g.norm());
    worst = std::max(worst, mirror_gap(s) / std::max(scale, 1.0));
  }
  double v_max = 0.0;
  for (MomentumKind kind : kAllMomentumKinds) {
    RunConfig id = c;
    id.kind = kind;
    id.schedule = Schedule::decreasing(kind);
    id.T = 500;
    id.compressor = "identity";
    for (const auto& rec : run(id).trajectory.records) v_max = std::max(v_max, rec.V);
  }
  return {worst <= 1e-9 && v_max == 0.0,
          "relative mirror gap " + fmt(worst) + ", identity max V_t " + fmt(v_max)};
}

// 5. Noiseless descent audit.
Verdict descent_audit() {
  std::string detail;
  bool ok = true;
  for (MomentumKind kind : {MomentumKind::SGDM, MomentumKind::MVR}) {
    RunConfig c;
    c.kind = kind;
    c.schedule = Schedule::decreasing(kind);
    c.n = 10;
    c.d = 50;
    c.T = 1000;
    c.master_seed = 5;
    c.problem.seed = 5;
    c.problem.noise = {};
    ProblemPtr p = make_problem(c.problem, c.n, c.d);
    const RunResult r = run(c, p);
    const DescentAudit a = audit_descent(r.trajectory, p->constants().L, p->constants().f_inf);
    ok = ok && a.checked == c.T && a.count() == 0;
    detail += std::string(detail.empty() ? "" : ", ") + std::string(to_string(kind)) + " " +
              std::to_string(a.count()) + "/" + std::to_string(a.checked) + " violations";
  }
  return {ok, detail};
}

// 6. Output iterate drawn with probability proportional to gamma_t.
Verdict output_selection() {
  const std::size_t T = 32;
  const int reps = 10000;
  const double critical = 52.191;  // chi-square, df 31, 1%
  std::string detail;
  bool ok = true;
  const Schedule schedules[] = {Schedule::constant(0.1, 1.0),
                                Schedule::decreasing(MomentumKind::SGDM)};
  const char* names[] = {"constant", "p=3/4"};
  for (int s = 0; s < 2; ++s) {
    std::vector<double> gammas;
    for (std::size_t t = 0; t < T; ++t) gammas.push_back(gamma_at(schedules[s], t));
    double total = 0.0;
    for (double g : gammas) total += g;
    std::vector<double> counts(T, 0.0);
    RngStream rng = derive_stream(6 + static_cast<std::uint64_t>(s), {"acceptance", "output"});
    for (int r = 0; r < reps; ++r) counts[select_output(gammas, rng)] += 1.0;
    double chi2 = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double e = reps * gammas[t] / total;
      chi2 += (counts[t] - e) * (counts[t] - e) / e;
    }
    ok = ok && chi2 < critical;
    detail += std::string(detail.empty() ? "" : ", ") + names[s] + " chi2 " + fmt(chi2);
  }
  return {ok, detail + " (critical " + fmt(critical) + ")"};
}

// 7. Empirical rates of the gamma-weighted mean gradient norm.
Verdict empirical_rates() {
  const auto start = std::chrono::steady_clock::now();
  RunConfig base;
  base.n = 10;
  base.d = 200;
  base.T = 100000;
  base.compressor = "topk:0.1";
  base.problem.noise = {1.0, 0.0};
  base.record_stride = 100;
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const std::vector<MomentumKind> kinds(kAllMomentumKinds.begin(), kAllMomentumKinds.end());
  CompareOptions options;
  options.parallel_runs = std::max(1u, std::thread::hardware_concurrency());
  const ComparisonReport report = compare_methods(base, kinds, seeds, options);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  auto band = [](MomentumKind k) -> std::pair<double, double> {
    switch (k) {
      case MomentumKind::SGDM: return {-0.35, -0.15};
      case MomentumKind::IGT: return {-0.40, -0.18};
      default: return {-0.45, -0.22};
    }
  };
  bool ok = true;
  std::string detail;
  double slope[5] = {};
  for (const KindSummary& s : report.summary) {
    const auto [lo, hi] = band(s.kind);
    const bool in = s.mean_slope >= lo && s.mean_slope <= hi;
    ok = ok && in;
    slope[static_cast<int>(s.kind)] = s.mean_slope;
    detail += std::string(to_string(s.kind)) + " " + fmt(s.mean_slope) +
              (s.stderr_slope ? " +- " + fmt(*s.stderr_slope) : "") + (in ? "" : " (out of band)") +
              ", ";
  }
  const bool order = slope[static_cast<int>(MomentumKind::MVR)] <=
                         slope[static_cast<int>(MomentumKind::SGDM)] &&
                     slope[static_cast<int>(MomentumKind::HM)] <=
                         slope[static_cast<int>(MomentumKind::SGDM)];
  ok = ok && order;
  detail += std::string(order ? "ordering holds" : "ordering violated") + ", " + fmt(seconds) + " s";
  return {ok, detail};
}

// 8. Oracle calls per client per step match the method's budget.
Verdict oracle_counts() {
  const OracleCounts expected[] = {{1, 0}, {1, 0}, {1, 1}, {1, 1}, {2, 0}};
  bool ok = true;
  std::string detail;
  for (std::size_t k = 0; k < kAllMomentumKinds.size(); ++k) {
    const MomentumKind kind = kAllMomentumKinds[k];
    RunConfig c;
    c.kind = kind;
    c.schedule = Schedule::decreasing(kind);
    c.n = 5;
    c.d = 20;
    c.T = 200;
    c.master_seed = 8;
    c.problem.seed = 8;
    c.problem.noise = {0.3, 0.3};
    const RunResult r = run(c);
    const OracleCounts b = oracle_budget(kind);
    bool kind_ok = b.grads == expected[k].grads && b.hvps == expected[k].hvps;
    for (const OracleCounts& calls : r.oracle_calls)
      kind_ok = kind_ok && calls.grads == c.T * b.grads && calls.hvps == c.T * b.hvps;
    ok = ok && kind_ok;
    detail += std::string(detail.empty() ? "" : ", ") + std::string(to_string(kind)) + " " +
              std::to_string(b.grads) + "g+" + std::to_string(b.hvps) + "h";
  }
  return {ok, detail};
}

// 9. Threaded CLI runs are byte-identical across processes.
Verdict cli_reproducibility() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "normef_acceptance";
  fs::create_directories(dir);
  std::vector<std::string> contents;
  for (int r = 0; r < 2; ++r) {
    const fs::path out = dir / ("run" + std::to_string(r) + ".csv");
    const std::string cmd = std::string(NORMEF_CLI_PATH) +
                            " run --method mvr --clients 8 --dim 64 --iters 2000 "
                            "--sigma-g 0.5 --sigma-h 0.5 --seed 9 --threads 4 --out " +
                            out.string() + " 2>/dev/null";
    if (std::system(cmd.c_str()) != 0) {
      fs::remove_all(dir);
      return {false, "cli run failed"};
    }
    std::ifstream in(out, std::ios::binary);
    contents.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  fs::remove_all(dir);
  const bool ok = !contents[0].empty() && contents[0] == contents[1];
  return {ok, std::to_string(contents[0].size()) + " bytes, " + (ok ? "identical" : "differ")};
}

}  // namespace
}  // namespace normef

int main(int argc, char** argv) {
  using namespace normef;
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"centralized equivalence", centralized_equivalence},
      {"compressor contraction", compressor_contraction},
      {"momentum units", momentum_units},
      {"server mirror", mirror_and_identity},
      {"descent audit", descent_audit},
      {"output selection", output_selection},
      {"empirical rates", empirical_rates},
      {"oracle counts", oracle_counts},
      {"cli reproducibility", cli_reproducibility},
  };
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int a = 1; a < argc; ++a) {
    const int k = std::atoi(argv[a]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::cerr << "usage: acceptance [criterion ...]\n";
      return 1;
    }
    selected[static_cast<std::size_t>(k - 1)] = true;
  }
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (!selected[k]) continue;
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.passed) ++failures;
    std::cout << (v.passed ? "PASS" : "FAIL") << " " << (k + 1) << " " << criteria[k].first
              << ": " << v.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
