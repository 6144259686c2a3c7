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
#include "normef/schedules.hpp"

#include <cmath>

namespace normef {

Exponents default_exponents(MomentumKind kind) {
  switch (kind) {
    case MomentumKind::SGDM: return {3.0 / 4.0, 1.0 / 2.0};
    case MomentumKind::IGT: return {5.0 / 7.0, 4.0 / 7.0};
    case MomentumKind::RHM:
    case MomentumKind::HM:
    case MomentumKind::MVR: return {2.0 / 3.0, 2.0 / 3.0};
  }
  return {};
}

Schedule Schedule::decreasing(MomentumKind kind, double gamma0,
                              std::size_t epoch_length) {
  return decreasing(default_exponents(kind), gamma0, epoch_length);
}

Schedule Schedule::decreasing(Exponents exponents, double gamma0,
                              std::size_t epoch_length) {
  Schedule s;
  s.mode = ScheduleMode::Decreasing;
  s.gamma0 = gamma0;
  s.p = exponents.p;
  s.q = exponents.q;
  s.epoch_length = epoch_length;
  s.validate();
  return s;
}

Schedule Schedule::constant(double gamma, double eta) {
  Schedule s;
  s.mode = ScheduleMode::Constant;
  s.gamma = gamma;
  s.eta = eta;
  s.validate();
  return s;
}

void Schedule::validate() const {
  if (mode == ScheduleMode::Decreasing) {
    if (!(gamma0 > 0.0)) throw ConfigError("gamma0", "must be positive");
    if (!(p >= 0.0)) throw ConfigError("gamma-exponent", "must be >= 0");
    if (!(q >= 0.0 && q < 1.0)) throw ConfigError("eta-exponent", "must lie in [0, 1)");
  } else {
    if (!(gamma > 0.0)) throw ConfigError("gamma", "must be positive");
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta", "must lie in (0, 1]");
  }
}

namespace {

double decay_base(const Schedule& s, std::size_t t) {
  const std::size_t tau = s.epoch_length > 0 ? t / s.epoch_length : t;
  return 2.0 / (static_cast<double>(tau) + 2.0);
}

}  // namespace

double eta_at(const Schedule& s, std::size_t t) {
  if (s.mode == ScheduleMode::Constant) return s.eta;
  return std::pow(decay_base(s, t), s.q);
}

double gamma_at(const Schedule& s, std::size_t t) {
  if (s.mode == ScheduleMode::Constant) return s.gamma;
  return s.gamma0 * std::pow(decay_base(s, t), s.p);
}

}  // namespace normef
