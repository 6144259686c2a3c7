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
#ifndef NORMEF_CONFIG_HPP
#define NORMEF_CONFIG_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "normef/engine.hpp"
#include "normef/harness.hpp"

namespace normef {

enum class Subcommand { Run, Compare, Audit, Selftest };

/// Bad command line or config file; reported with a one-line message.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// --help was given; text is the help of the innermost subcommand named.
class HelpRequest : public std::runtime_error {
 public:
  explicit HelpRequest(const std::string& text) : std::runtime_error(text) {}
};

/// A fully resolved command line.
struct CliInvocation {
  Subcommand subcommand = Subcommand::Run;
  RunConfig config;
  std::string out;             // empty = standard output
  std::string format = "csv";  // csv | jsonl
  std::string config_path;

  // compare
  std::vector<MomentumKind> methods;
  std::vector<std::uint64_t> seeds;
  CompareOptions compare;
};

/// Flat key=value settings. Keys are the long flag names without dashes.
using Settings = std::map<std::string, std::string>;

/// Reads "key=value" lines; blank lines and lines starting with '#' are
/// ignored.
Settings read_settings(std::istream& in);
Settings read_settings_file(const std::string& path);

/// Applies settings over defaults. Throws ConfigError naming the field.
CliInvocation resolve(Subcommand subcommand, const Settings& settings);

/// Every resolved field as key=value lines; re-reading the text with
/// resolve() reproduces the same configuration.
std::string resolved_settings_text(const CliInvocation& invocation);

/// Parses argv (argv[0] is the program name). Flags override fields from
/// --config. Throws UsageError for unknown flags or subcommands and
/// ConfigError for missing or malformed fields, HelpRequest for --help.
CliInvocation parse_and_validate(int argc, const char* const* argv);

/// Help text listing subcommands and flags.
std::string usage_text();

}  // namespace normef

#endif  // NORMEF_CONFIG_HPP
