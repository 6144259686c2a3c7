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
#ifndef NORMEF_CLI_HPP
#define NORMEF_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "normef/config.hpp"

namespace normef {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitNumerical = 3,
  kExitCheckFailed = 4,
};

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// eta = 1 collapse, identity-compressor collapse and centralized
/// equivalence on small instances.
std::vector<SelftestResult> run_selftests();

/// Runs a validated invocation. Results go to the configured output path or
/// to `out`; diagnostics go to `err`. Returns an ExitCode.
int execute(const CliInvocation& invocation, std::ostream& out, std::ostream& err);

/// parse_and_validate + execute with every error mapped to an exit code and
/// a one-line message on `err`.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace normef

#endif  // NORMEF_CLI_HPP
