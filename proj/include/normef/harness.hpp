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
#ifndef NORMEF_HARNESS_HPP
#define NORMEF_HARNESS_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "normef/engine.hpp"

namespace normef {

enum class Aggregation { GammaWeightedMean, RunningMin };

/// Range of prefix lengths T' used by a fit. Zeros select the default
/// [ceil(T/10), T], which drops the first tenth as burn-in.
struct FitWindow {
  std::size_t t_min = 0;
  std::size_t t_max = 0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  FitWindow window;
  std::size_t points = 0;
};

class DegenerateFitError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Least-squares line through (log T', log m(T')) over a geometric grid of
/// prefix lengths, where m(T') aggregates grad_norm over records with
/// t < T'. Points with m(T') <= 0 are skipped.
RateFit fit_rate(const Trajectory& trajectory, Aggregation aggregation,
                 FitWindow window = {}, std::size_t grid_points = 30);

/// sum gamma_t grad_norm_t / sum gamma_t over the given records.
double weighted_grad_average(std::span<const MetricsRecord> records);
/// Same over the output candidates t < T.
double weighted_grad_average(const Trajectory& trajectory);

struct DescentAudit {
  std::size_t checked = 0;
  std::vector<std::size_t> violations;  // t where step t -> t+1 fails

  std::size_t count() const { return violations.size(); }
};

/// Checks, for every recorded step t -> t+1,
///   D_{t+1} + g_t ||grad f(x^t)|| <= D_t + 2 g_t ||v^t - grad f(x^t)||
///                                     + 2 g_t V_t + g_t^2 L / 2 + tolerance
/// with D_t = f(x^t) - f_inf and g_t the stepsize. Throws std::logic_error
/// for stochastic, non-normalized or strided trajectories.
DescentAudit audit_descent(const Trajectory& trajectory, double L, double f_inf,
                           double tolerance = 1e-8);

struct ComparisonRow {
  MomentumKind kind = MomentumKind::SGDM;
  std::uint64_t seed = 0;
  RateFit fit;
  double weighted_average = 0.0;
  std::optional<std::size_t> iters_to_eps;
  std::optional<std::uint64_t> bits_to_eps;
};

struct KindSummary {
  MomentumKind kind = MomentumKind::SGDM;
  std::size_t runs = 0;
  double mean_slope = 0.0;
  std::optional<double> stderr_slope;  // absent for a single seed
  double mean_r_squared = 0.0;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;     // kinds outer, seeds inner
  std::vector<KindSummary> summary;    // one per listed kind
  double eps = 0.0;
};

struct CompareOptions {
  double eps = 1e-2;
  Aggregation aggregation = Aggregation::GammaWeightedMean;
  FitWindow window;
  std::size_t parallel_runs = 1;
};

/// Runs every kind with its default exponents on the instance built from
/// each seed (problem seed = master seed = seed).
ComparisonReport compare_methods(const RunConfig& base, std::span<const MomentumKind> kinds,
                                 std::span<const std::uint64_t> seeds,
                                 const CompareOptions& options = {});

inline constexpr const char* kComparisonCsvHeader = "kind,seed,slope,r2,iters_to_eps,bits_to_eps";

void write_report_csv(std::ostream& out, const ComparisonReport& report);
void print_report_table(std::ostream& out, const ComparisonReport& report);

}  // namespace normef

#endif  // NORMEF_HARNESS_HPP
