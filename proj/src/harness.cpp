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
#include "normef/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include <tbb/info.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include "normef/trace_io.hpp"

namespace normef {

namespace {

std::vector<std::size_t> geometric_grid(std::size_t lo, std::size_t hi, std::size_t count) {
  std::vector<std::size_t> grid;
  const double ratio = static_cast<double>(hi) / static_cast<double>(lo);
  for (std::size_t k = 0; k < count; ++k) {
    const double frac = count > 1 ? static_cast<double>(k) / static_cast<double>(count - 1) : 1.0;
    auto value = static_cast<std::size_t>(std::llround(static_cast<double>(lo) * std::pow(ratio, frac)));
    value = std::clamp(value, lo, hi);
    if (grid.empty() || grid.back() != value) grid.push_back(value);
  }
  return grid;
}

struct PrefixPoint {
  std::size_t t;  // prefix covers steps s < t
  double value;
};

// Aggregate of grad_norm over s < t for every recorded t. Uses the exact
// running sums when the trajectory carries them, otherwise the records
// themselves (exact at stride 1).
std::vector<PrefixPoint> prefix_points(const Trajectory& trajectory, Aggregation aggregation) {
  const auto& recs = trajectory.records;
  std::vector<PrefixPoint> out;
  out.reserve(recs.size());
  double num = 0.0, den = 0.0, low = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < recs.size(); ++k) {
    const MetricsRecord& r = recs[k];
    if (r.t > trajectory.horizon) break;
    double value;
    if (trajectory.prefix_sums) {
      value = aggregation == Aggregation::GammaWeightedMean
                  ? (r.gamma_sum > 0.0 ? r.weighted_grad_sum / r.gamma_sum : 0.0)
                  : r.grad_min;
    } else {
      value = aggregation == Aggregation::GammaWeightedMean ? (den > 0.0 ? num / den : 0.0) : low;
      num += r.gamma * r.grad_norm;
      den += r.gamma;
      low = std::min(low, r.grad_norm);
    }
    out.push_back({r.t, value});
  }
  return out;
}

}  // namespace

RateFit fit_rate(const Trajectory& trajectory, Aggregation aggregation, FitWindow window,
                 std::size_t grid_points) {
  const std::size_t T = trajectory.horizon;
  if (window.t_min == 0 && window.t_max == 0)
    window = {std::max<std::size_t>(1, (T + 9) / 10), T};
  if (window.t_min < 1 || window.t_max > T || window.t_min >= window.t_max)
    throw std::invalid_argument("fit_rate: window must satisfy 1 <= t_min < t_max <= T");

  const std::vector<PrefixPoint> prefix = prefix_points(trajectory, aggregation);

  const auto grid = geometric_grid(window.t_min, window.t_max, grid_points);
  if (grid.size() < 10)
    throw std::invalid_argument("fit_rate: window yields fewer than 10 grid points");

  std::vector<double> xs, ys;
  std::size_t last_t = 0;
  for (std::size_t prefix_len : grid) {
    // Last prefix ending at or before the grid point.
    auto it = std::upper_bound(prefix.begin(), prefix.end(), prefix_len,
                               [](std::size_t v, const PrefixPoint& p) { return v < p.t; });
    if (it == prefix.begin()) continue;
    --it;
    if (it->t == 0 || it->t == last_t) continue;
    last_t = it->t;
    if (!(it->value > 0.0) || !std::isfinite(it->value)) continue;
    xs.push_back(std::log(static_cast<double>(it->t)));
    ys.push_back(std::log(it->value));
  }
  if (xs.empty()) throw DegenerateFitError("fit_rate: metric is zero over the whole window");
  if (xs.size() < 2) throw DegenerateFitError("fit_rate: fewer than two positive points");

  const double count = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / count;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / count;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double r = ys[k] - (fit.intercept + fit.slope * xs[k]);
    ss_res += r * r;
  }
  // A flat series leaves only rounding in syy; call that a perfect fit.
  const double flat = 1e-24 * count * std::max(1.0, my * my);
  fit.r_squared = syy > flat ? std::max(0.0, 1.0 - ss_res / syy) : 1.0;
  fit.window = window;
  fit.points = xs.size();
  return fit;
}

double weighted_grad_average(std::span<const MetricsRecord> records) {
  if (records.empty()) throw std::invalid_argument("weighted_grad_average: empty trajectory");
  double num = 0.0, den = 0.0;
  for (const MetricsRecord& r : records) {
    num += r.gamma * r.grad_norm;
    den += r.gamma;
  }
  return num / den;
}

double weighted_grad_average(const Trajectory& trajectory) {
  if (trajectory.prefix_sums && !trajectory.records.empty() &&
      trajectory.records.back().t == trajectory.horizon && trajectory.records.back().gamma_sum > 0.0)
    return trajectory.records.back().weighted_grad_sum / trajectory.records.back().gamma_sum;
  return weighted_grad_average(trajectory.candidates());
}

DescentAudit audit_descent(const Trajectory& trajectory, double L, double f_inf,
                           double tolerance) {
  if (trajectory.stochastic)
    throw std::logic_error("audit_descent: the pathwise inequality needs a noiseless run");
  if (!trajectory.normalized)
    throw std::logic_error("audit_descent: the inequality applies to normalized steps only");
  if (trajectory.stride != 1)
    throw std::logic_error("audit_descent: every step must be recorded (stride 1)");

  DescentAudit audit;
  const auto& recs = trajectory.records;
  for (std::size_t k = 0; k + 1 < recs.size(); ++k) {
    const MetricsRecord& now = recs[k];
    const MetricsRecord& next = recs[k + 1];
    if (next.t != now.t + 1) continue;
    const double g = now.gamma;
    const double lhs = (next.f_value - f_inf) + g * now.grad_norm;
    const double rhs = (now.f_value - f_inf) + 2.0 * g * now.momentum_error + 2.0 * g * now.V +
                       0.5 * g * g * L + tolerance;
    ++audit.checked;
    if (lhs > rhs) audit.violations.push_back(now.t);
  }
  return audit;
}

ComparisonReport compare_methods(const RunConfig& base, std::span<const MomentumKind> kinds,
                                 std::span<const std::uint64_t> seeds,
                                 const CompareOptions& options) {
  if (kinds.empty()) throw std::invalid_argument("compare_methods: no kinds given");
  if (seeds.empty()) throw std::invalid_argument("compare_methods: no seeds given");
  base.validate();

  // One instance per seed, shared by every kind.
  std::vector<ProblemPtr> instances;
  for (std::uint64_t seed : seeds) {
    ProblemSpec spec = base.problem;
    spec.seed = seed;
    instances.push_back(make_problem(spec, base.n, base.d));
  }

  ComparisonReport report;
  report.eps = options.eps;
  report.rows.resize(kinds.size() * seeds.size());

  auto one_run = [&](std::size_t job) {
    const std::size_t ki = job / seeds.size();
    const std::size_t si = job % seeds.size();
    RunConfig config = base;
    config.kind = kinds[ki];
    config.master_seed = seeds[si];
    config.problem.seed = seeds[si];
    if (base.schedule.mode == ScheduleMode::Decreasing)
      config.schedule = Schedule::decreasing(kinds[ki], base.schedule.gamma0,
                                             base.schedule.epoch_length);
    RunResult result = run(config, instances[si]);

    ComparisonRow& row = report.rows[job];
    row.kind = kinds[ki];
    row.seed = seeds[si];
    row.fit = fit_rate(result.trajectory, options.aggregation, options.window);
    row.weighted_average = weighted_grad_average(result.trajectory);
    for (const MetricsRecord& r : result.trajectory.records) {
      if (r.grad_norm <= options.eps) {
        row.iters_to_eps = r.t;
        row.bits_to_eps = r.cumulative_bits;
        break;
      }
    }
  };

  const std::size_t jobs = report.rows.size();
  if (options.parallel_runs > 1) {
    tbb::task_arena arena(
        std::min(static_cast<int>(options.parallel_runs), tbb::info::default_concurrency()));
    arena.execute([&] { tbb::parallel_for(std::size_t{0}, jobs, one_run); });
  } else {
    for (std::size_t job = 0; job < jobs; ++job) one_run(job);
  }

  for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
    KindSummary s;
    s.kind = kinds[ki];
    s.runs = seeds.size();
    double sum = 0.0, sum_r2 = 0.0;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      sum += report.rows[ki * seeds.size() + si].fit.slope;
      sum_r2 += report.rows[ki * seeds.size() + si].fit.r_squared;
    }
    const double count = static_cast<double>(seeds.size());
    s.mean_slope = sum / count;
    s.mean_r_squared = sum_r2 / count;
    if (seeds.size() > 1) {
      double ss = 0.0;
      for (std::size_t si = 0; si < seeds.size(); ++si) {
        const double dev = report.rows[ki * seeds.size() + si].fit.slope - s.mean_slope;
        ss += dev * dev;
      }
      s.stderr_slope = std::sqrt(ss / (count - 1.0)) / std::sqrt(count);
    }
    report.summary.push_back(s);
  }
  return report;
}

void write_report_csv(std::ostream& out, const ComparisonReport& report) {
  out << kComparisonCsvHeader << '\n';
  for (const ComparisonRow& row : report.rows) {
    out << to_string(row.kind) << ',' << row.seed << ',' << format_real(row.fit.slope) << ','
        << format_real(row.fit.r_squared) << ',';
    if (row.iters_to_eps) out << *row.iters_to_eps;
    out << ',';
    if (row.bits_to_eps) out << *row.bits_to_eps;
    out << '\n';
  }
}

void print_report_table(std::ostream& out, const ComparisonReport& report) {
  const auto flags = out.flags();
  out << std::left << std::setw(6) << "kind" << std::setw(8) << "seed" << std::right
      << std::setw(10) << "slope" << std::setw(10) << "r2" << std::setw(14) << "wavg"
      << std::setw(14) << "iters<=eps" << std::setw(16) << "bits<=eps" << '\n';
  out << std::fixed;
  for (const ComparisonRow& row : report.rows) {
    out << std::left << std::setw(6) << to_string(row.kind) << std::setw(8) << row.seed
        << std::right << std::setprecision(4) << std::setw(10) << row.fit.slope
        << std::setw(10) << row.fit.r_squared << std::setprecision(6) << std::setw(14)
        << row.weighted_average << std::setw(14)
        << (row.iters_to_eps ? std::to_string(*row.iters_to_eps) : "-") << std::setw(16)
        << (row.bits_to_eps ? std::to_string(*row.bits_to_eps) : "-") << '\n';
  }
  out << "\nper-method slope (eps = " << std::setprecision(4) << report.eps << ")\n";
  for (const KindSummary& s : report.summary) {
    out << std::left << std::setw(6) << to_string(s.kind) << std::right << std::setw(10)
        << s.mean_slope;
    if (s.stderr_slope)
      out << " +- " << *s.stderr_slope;
    else
      out << " +- n/a";
    out << "  (" << s.runs << " runs, mean r2 " << s.mean_r_squared << ")\n";
  }
  out.flags(flags);
}

}  // namespace normef
