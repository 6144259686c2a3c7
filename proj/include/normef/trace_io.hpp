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
#ifndef NORMEF_TRACE_IO_HPP
#define NORMEF_TRACE_IO_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "normef/engine.hpp"

namespace normef {

inline constexpr const char* kTrajectoryCsvHeader =
    "t,grad_norm,f_value,V_t,U_t,gamma_t,eta_t,cum_bits";

/// Shortest decimal that round-trips to the same double.
std::string format_real(double x);

void write_csv(std::ostream& out, std::span<const MetricsRecord> records);
void write_jsonl(std::ostream& out, std::span<const MetricsRecord> records);

/// Parses the CSV written by write_csv (momentum_error is not stored).
std::vector<MetricsRecord> read_csv(std::istream& in);

}  // namespace normef

#endif  // NORMEF_TRACE_IO_HPP
