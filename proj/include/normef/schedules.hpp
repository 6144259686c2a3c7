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
#ifndef NORMEF_SCHEDULES_HPP
#define NORMEF_SCHEDULES_HPP

#include <cstddef>

#include "normef/momentum.hpp"

namespace normef {

struct Exponents {
  double p = 0.0;  // stepsize decay
  double q = 0.0;  // momentum decay
};

/// Decay exponents under which each momentum variant carries its
/// parameter-agnostic guarantee.
Exponents default_exponents(MomentumKind kind);

enum class ScheduleMode { Decreasing, Constant };

/// Stepsize gamma_t and momentum eta_t as functions of t only.
///
/// Decreasing: eta_t = (2/(tau+2))^q, gamma_t = gamma0 (2/(tau+2))^p, with
/// tau = t, or tau = floor(t / epoch_length) when epoch_length > 0.
/// Constant: gamma_t = gamma, eta_t = eta.
///
/// No field depends on problem constants.
struct Schedule {
  ScheduleMode mode = ScheduleMode::Decreasing;
  double gamma0 = 1.0;
  double p = 0.0;
  double q = 0.0;
  std::size_t epoch_length = 0;  // 0 = per-iteration
  double gamma = 0.1;            // constant mode
  double eta = 1.0;              // constant mode

  static Schedule decreasing(MomentumKind kind, double gamma0 = 1.0,
                             std::size_t epoch_length = 0);
  static Schedule decreasing(Exponents exponents, double gamma0 = 1.0,
                             std::size_t epoch_length = 0);
  static Schedule constant(double gamma, double eta);

  void validate() const;
};

double eta_at(const Schedule& s, std::size_t t);
double gamma_at(const Schedule& s, std::size_t t);

}  // namespace normef

#endif  // NORMEF_SCHEDULES_HPP
