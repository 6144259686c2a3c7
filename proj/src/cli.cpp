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
#include "normef/cli.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "normef/trace_io.hpp"

namespace normef {

namespace {

// Opens the output target up front so an unwritable path fails before any
// work is done.
class OutputTarget {
 public:
  OutputTarget(const std::string& path, std::ostream& fallback) : path_(path), fallback_(fallback) {
    if (!path_.empty()) {
      file_.open(path_, std::ios::binary | std::ios::trunc);
      if (!file_) throw std::ios_base::failure("cannot open output file '" + path_ + "'");
    }
  }

  std::ostream& stream() { return path_.empty() ? fallback_ : file_; }

  void finish() {
    stream().flush();
    if (!stream()) throw std::ios_base::failure("write to '" + label() + "' failed");
  }

  std::string label() const { return path_.empty() ? "<stdout>" : path_; }

 private:
  std::string path_;
  std::ostream& fallback_;
  std::ofstream file_;
};

// Resolved config goes next to the output, or to err as comments when the
// output is standard output.
void echo_config(const CliInvocation& inv, std::ostream& err) {
  const std::string text = resolved_settings_text(inv);
  if (inv.out.empty()) {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) err << "# " << line << '\n';
    return;
  }
  std::ofstream cfg(inv.out + ".cfg", std::ios::trunc);
  if (!cfg) throw std::ios_base::failure("cannot open '" + inv.out + ".cfg'");
  cfg << text;
  if (!cfg) throw std::ios_base::failure("write to '" + inv.out + ".cfg' failed");
}

int do_run(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  OutputTarget target(inv.out, out);
  echo_config(inv, err);
  RunResult result = run(inv.config);
  if (inv.format == "jsonl")
    write_jsonl(target.stream(), result.trajectory.records);
  else
    write_csv(target.stream(), result.trajectory.records);
  target.finish();
  return kExitOk;
}

int do_compare(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  OutputTarget target(inv.out, out);
  echo_config(inv, err);
  ComparisonReport report = compare_methods(inv.config, inv.methods, inv.seeds, inv.compare);
  write_report_csv(target.stream(), report);
  target.finish();
  print_report_table(inv.out.empty() ? err : out, report);
  return kExitOk;
}

int do_audit(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  RunConfig config = inv.config;
  if (config.stochastic())
    throw ConfigError("sigma-g", "audit needs a noiseless run (sigma-g = sigma-h = 0)");
  if (!config.normalized) throw ConfigError("normalized", "audit applies to normalized runs");
  if (config.record_stride != 1) throw ConfigError("record-stride", "audit needs stride 1");
  OutputTarget target(inv.out, out);
  echo_config(inv, err);
  ProblemPtr problem = make_problem(config.problem, config.n, config.d);
  RunResult result = run(config, problem);
  if (inv.format == "jsonl")
    write_jsonl(target.stream(), result.trajectory.records);
  else
    write_csv(target.stream(), result.trajectory.records);
  target.finish();

  const ProblemConstants& k = problem->constants();
  DescentAudit audit = audit_descent(result.trajectory, k.L, k.f_inf);
  err << "audit: " << audit.checked << " steps checked, " << audit.count() << " violations";
  if (!k.f_inf_exact) err << " (f_inf estimated)";
  err << '\n';
  if (audit.count() > 0) {
    err << "first violation at t = " << audit.violations.front() << '\n';
    return kExitCheckFailed;
  }
  return kExitOk;
}

int do_selftest(std::ostream& out) {
  bool ok = true;
  for (const SelftestResult& r : run_selftests()) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.detail.empty()) out << ": " << r.detail;
    out << '\n';
    ok = ok && r.passed;
  }
  out << (ok ? "all checks passed" : "some checks failed") << '\n';
  return ok ? kExitOk : kExitCheckFailed;
}

double max_abs_diff(const Vector& a, const Vector& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

SelftestResult check_eta_one_collapse() {
  SelftestResult r{"eta=1 collapse", true, {}};
  ProblemSpec spec;
  spec.seed = 7;
  spec.noise = {0.1, 0.1};
  ProblemPtr problem = make_problem(spec, 2, 8);
  RngStream rng = derive_stream(11, {"selftest", "points"});
  const Vector x_prev = rng.gaussian(8, 1.0);
  const Vector x_next = rng.gaussian(8, 1.0);
  const MomentumState state{rng.gaussian(8, 1.0)};
  const RngStream minibatch = minibatch_stream(11, 1, 3);
  double worst = 0.0;
  for (MomentumKind kind : kAllMomentumKinds) {
    MomentumState next =
        update_momentum(kind, state, *problem, 1, x_prev, x_next, 1.0, minibatch);
    RngStream copy = minibatch;
    ClientOracle oracle(*problem, 1, copy);
    worst = std::max(worst, max_abs_diff(next.v, oracle.grad(x_next)));
  }
  r.passed = worst == 0.0;
  r.detail = "max deviation " + format_real(worst);
  return r;
}

SelftestResult check_identity_compressor() {
  SelftestResult r{"identity compressor", true, {}};
  RunConfig config;
  config.compressor = "identity";
  config.n = 4;
  config.d = 10;
  config.T = 50;
  config.master_seed = 3;
  config.problem.seed = 3;
  config.problem.noise.sigma_g = 0.1;
  double worst = 0.0;
  for (MomentumKind kind : kAllMomentumKinds) {
    config.kind = kind;
    config.schedule = Schedule::decreasing(kind);
    for (const MetricsRecord& rec : run(config).trajectory.records) worst = std::max(worst, rec.V);
  }
  r.passed = worst == 0.0;
  r.detail = "max V_t " + format_real(worst);
  return r;
}

SelftestResult check_centralized_equivalence() {
  SelftestResult r{"centralized equivalence", true, {}};
  RunConfig config;
  config.compressor = "identity";
  config.n = 1;
  config.d = 10;
  config.T = 50;
  config.master_seed = 5;
  config.problem.seed = 5;
  config.problem.noise.sigma_g = 0.1;
  config.problem.noise.sigma_h = 0.1;
  double worst = 0.0;
  for (MomentumKind kind : kAllMomentumKinds) {
    config.kind = kind;
    config.schedule = Schedule::decreasing(kind);
    ProblemPtr problem = make_problem(config.problem, config.n, config.d);
    const std::vector<Vector> reference = run_centralized_reference(config, problem);
    EngineState state = init(config, problem);
    worst = std::max(worst, max_abs_diff(state.server.x, reference[0]));
    for (std::size_t t = 0; t < config.T; ++t) {
      advance(state, config);
      worst = std::max(worst, max_abs_diff(state.server.x, reference[t + 1]));
    }
  }
  r.passed = worst <= 1e-12;
  r.detail = "max deviation " + format_real(worst);
  return r;
}

}  // namespace

std::vector<SelftestResult> run_selftests() {
  std::vector<SelftestResult> results;
  for (auto check : {check_eta_one_collapse, check_identity_compressor,
                     check_centralized_equivalence}) {
    try {
      results.push_back(check());
    } catch (const std::exception& e) {
      results.push_back({"selftest", false, e.what()});
    }
  }
  return results;
}

int execute(const CliInvocation& invocation, std::ostream& out, std::ostream& err) {
  switch (invocation.subcommand) {
    case Subcommand::Run:
      return do_run(invocation, out, err);
    case Subcommand::Compare:
      return do_compare(invocation, out, err);
    case Subcommand::Audit:
      return do_audit(invocation, out, err);
    case Subcommand::Selftest:
      return do_selftest(out);
  }
  return kExitUsage;
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    CliInvocation inv = parse_and_validate(argc, argv);
    return execute(inv, out, err);
  } catch (const HelpRequest& e) {
    out << e.what();
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::ios_base::failure& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericalError& e) {
    err << "error: numerical failure at t = " << e.step() << ": " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace normef
