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
#include "normef/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "normef/trace_io.hpp"

namespace normef {

namespace {

struct KeyInfo {
  const char* name;
  const char* help;
};

// Run-shaping keys, in echo order.
constexpr KeyInfo kRunKeys[] = {
    {"method", "momentum variant: sgdm|igt|rhm|hm|mvr"},
    {"normalized", "true = normalized step, false = EF21 baseline step"},
    {"clients", "number of clients n"},
    {"dim", "dimension d"},
    {"iters", "number of iterations T"},
    {"schedule", "decreasing|constant"},
    {"gamma0", "initial stepsize for the decreasing schedule"},
    {"gamma-exponent", "stepsize decay exponent p (default per method)"},
    {"eta-exponent", "momentum decay exponent q (default per method)"},
    {"gamma", "stepsize in constant mode"},
    {"eta", "momentum parameter in constant mode"},
    {"granularity", "iter|epoch:<length>"},
    {"compressor", "identity|topk:<fraction>|randk:<fraction>"},
    {"problem", "quadratic|logreg"},
    {"heterogeneity", "quadratic: spread of the linear terms"},
    {"condition", "quadratic: condition number of each A_i"},
    {"samples-per-client", "logreg: rows per client"},
    {"sorted-fraction", "logreg: share of each class assigned by label"},
    {"lambda", "logreg: ridge parameter"},
    {"sigma-g", "gradient noise level"},
    {"sigma-h", "Hessian-vector noise level"},
    {"seed", "master seed"},
    {"init-scale", "x0 ~ N(0, s^2 I/d)"},
    {"problem-seed", "instance seed (default: seed)"},
    {"record-stride", "record metrics every N steps"},
    {"rhm-independent-batch", "true|false"},
    {"threads", "worker threads for the client phase"},
    {"format", "csv|jsonl"},
    {"trace-messages", "file receiving every compressed message"},
};

constexpr KeyInfo kCompareKeys[] = {
    {"methods", "comma-separated list of methods (default: all five)"},
    {"seeds", "comma-separated list of seeds (default: 1,2,3)"},
    {"eps", "gradient-norm threshold for iterations-to-eps"},
    {"parallel-runs", "runs executed concurrently"},
    {"fit-min", "smallest prefix length in the rate fit (default T/10)"},
    {"fit-max", "largest prefix length in the rate fit (default T)"},
    {"aggregation", "weighted|min"},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& field, const std::string& text) {
  T value{};
  const std::string s = trim(text);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError(field, "malformed number '" + text + "'");
  return value;
}

bool parse_bool(const std::string& field, const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(field, "expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) items.push_back(trim(item));
  return items;
}

const std::string* find(const Settings& s, const char* key) {
  auto it = s.find(key);
  return it == s.end() ? nullptr : &it->second;
}

bool is_known_key(const std::string& key) {
  for (const KeyInfo& k : kRunKeys)
    if (key == k.name) return true;
  for (const KeyInfo& k : kCompareKeys)
    if (key == k.name) return true;
  return key == "out";
}

}  // namespace

Settings read_settings(std::istream& in) {
  Settings settings;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(s.substr(0, eq));
    if (!is_known_key(key))
      throw UsageError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    settings[key] = trim(s.substr(eq + 1));
  }
  return settings;
}

Settings read_settings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config file '" + path + "'");
  return read_settings(in);
}

CliInvocation resolve(Subcommand subcommand, const Settings& s) {
  CliInvocation inv;
  inv.subcommand = subcommand;
  RunConfig& c = inv.config;

  if (const auto* v = find(s, "method")) {
    c.kind = parse_momentum_kind(*v);
  } else if (subcommand == Subcommand::Run || subcommand == Subcommand::Audit) {
    throw ConfigError("method", "missing required field (one of sgdm, igt, rhm, hm, mvr)");
  }
  if (const auto* v = find(s, "normalized")) c.normalized = parse_bool("normalized", *v);
  if (const auto* v = find(s, "clients")) c.n = parse_number<std::size_t>("clients", *v);
  if (const auto* v = find(s, "dim")) c.d = parse_number<std::size_t>("dim", *v);
  if (const auto* v = find(s, "iters")) c.T = parse_number<std::size_t>("iters", *v);

  std::size_t epoch_length = 0;
  if (const auto* v = find(s, "granularity")) {
    if (*v == "iter") {
      epoch_length = 0;
    } else if (v->rfind("epoch:", 0) == 0) {
      epoch_length = parse_number<std::size_t>("granularity", v->substr(6));
      if (epoch_length == 0) throw ConfigError("granularity", "epoch length must be positive");
    } else {
      throw ConfigError("granularity", "expected iter or epoch:<length>, got '" + *v + "'");
    }
  }
  std::string mode = "decreasing";
  if (const auto* v = find(s, "schedule")) mode = *v;
  if (mode == "decreasing") {
    Exponents e = default_exponents(c.kind);
    if (const auto* v = find(s, "gamma-exponent")) e.p = parse_number<double>("gamma-exponent", *v);
    if (const auto* v = find(s, "eta-exponent")) e.q = parse_number<double>("eta-exponent", *v);
    double gamma0 = 1.0;
    if (const auto* v = find(s, "gamma0")) gamma0 = parse_number<double>("gamma0", *v);
    c.schedule = Schedule::decreasing(e, gamma0, epoch_length);
  } else if (mode == "constant") {
    const auto* g = find(s, "gamma");
    const auto* e = find(s, "eta");
    if (!g) throw ConfigError("gamma", "missing required field for constant schedule");
    if (!e) throw ConfigError("eta", "missing required field for constant schedule");
    c.schedule = Schedule::constant(parse_number<double>("gamma", *g), parse_number<double>("eta", *e));
  } else {
    throw ConfigError("schedule", "expected decreasing or constant, got '" + mode + "'");
  }

  if (const auto* v = find(s, "compressor")) c.compressor = *v;
  if (const auto* v = find(s, "problem")) c.problem.generator = *v;
  if (c.problem.generator != "quadratic" && c.problem.generator != "logreg")
    throw ConfigError("problem", "expected quadratic or logreg, got '" + c.problem.generator + "'");
  if (const auto* v = find(s, "heterogeneity"))
    c.problem.heterogeneity = parse_number<double>("heterogeneity", *v);
  if (const auto* v = find(s, "condition")) c.problem.condition = parse_number<double>("condition", *v);
  if (const auto* v = find(s, "samples-per-client"))
    c.problem.samples_per_client = parse_number<std::size_t>("samples-per-client", *v);
  if (const auto* v = find(s, "sorted-fraction"))
    c.problem.sorted_fraction = parse_number<double>("sorted-fraction", *v);
  if (const auto* v = find(s, "lambda")) c.problem.lambda = parse_number<double>("lambda", *v);
  if (const auto* v = find(s, "sigma-g")) c.problem.noise.sigma_g = parse_number<double>("sigma-g", *v);
  if (const auto* v = find(s, "sigma-h")) c.problem.noise.sigma_h = parse_number<double>("sigma-h", *v);
  if (const auto* v = find(s, "seed")) c.master_seed = parse_number<std::uint64_t>("seed", *v);
  c.problem.seed = c.master_seed;
  if (const auto* v = find(s, "init-scale")) c.init_scale = parse_number<double>("init-scale", *v);
  if (const auto* v = find(s, "problem-seed"))
    c.problem.seed = parse_number<std::uint64_t>("problem-seed", *v);
  if (const auto* v = find(s, "record-stride"))
    c.record_stride = parse_number<std::size_t>("record-stride", *v);
  if (const auto* v = find(s, "rhm-independent-batch"))
    c.rhm_independent_batch = parse_bool("rhm-independent-batch", *v);
  if (const auto* v = find(s, "threads")) c.threads = parse_number<std::size_t>("threads", *v);
  if (const auto* v = find(s, "trace-messages")) c.trace_messages = *v;

  if (const auto* v = find(s, "out")) inv.out = *v;
  if (const auto* v = find(s, "format")) inv.format = *v;
  if (inv.format != "csv" && inv.format != "jsonl")
    throw ConfigError("format", "expected csv or jsonl, got '" + inv.format + "'");

  if (subcommand == Subcommand::Compare) {
    if (const auto* v = find(s, "methods")) {
      for (const auto& item : split_list(*v)) inv.methods.push_back(parse_momentum_kind(item));
      if (inv.methods.empty()) throw ConfigError("methods", "list is empty");
    } else {
      inv.methods.assign(kAllMomentumKinds.begin(), kAllMomentumKinds.end());
    }
    if (const auto* v = find(s, "seeds")) {
      for (const auto& item : split_list(*v))
        inv.seeds.push_back(parse_number<std::uint64_t>("seeds", item));
      if (inv.seeds.empty()) throw ConfigError("seeds", "list is empty");
    } else {
      inv.seeds = {1, 2, 3};
    }
    if (const auto* v = find(s, "eps")) inv.compare.eps = parse_number<double>("eps", *v);
    if (const auto* v = find(s, "parallel-runs"))
      inv.compare.parallel_runs = parse_number<std::size_t>("parallel-runs", *v);
    if (const auto* v = find(s, "fit-min"))
      inv.compare.window.t_min = parse_number<std::size_t>("fit-min", *v);
    if (const auto* v = find(s, "fit-max"))
      inv.compare.window.t_max = parse_number<std::size_t>("fit-max", *v);
    if (const auto* v = find(s, "aggregation")) {
      if (*v == "weighted")
        inv.compare.aggregation = Aggregation::GammaWeightedMean;
      else if (*v == "min")
        inv.compare.aggregation = Aggregation::RunningMin;
      else
        throw ConfigError("aggregation", "expected weighted or min, got '" + *v + "'");
    }
    if (inv.compare.parallel_runs < 1) throw ConfigError("parallel-runs", "must be at least 1");
  }

  c.validate();
  return inv;
}

std::string resolved_settings_text(const CliInvocation& inv) {
  const RunConfig& c = inv.config;
  std::ostringstream out;
  out << "method=" << to_string(c.kind) << '\n';
  out << "normalized=" << (c.normalized ? "true" : "false") << '\n';
  out << "clients=" << c.n << '\n';
  out << "dim=" << c.d << '\n';
  out << "iters=" << c.T << '\n';
  if (c.schedule.mode == ScheduleMode::Decreasing) {
    out << "schedule=decreasing\n";
    out << "gamma0=" << format_real(c.schedule.gamma0) << '\n';
    out << "gamma-exponent=" << format_real(c.schedule.p) << '\n';
    out << "eta-exponent=" << format_real(c.schedule.q) << '\n';
  } else {
    out << "schedule=constant\n";
    out << "gamma=" << format_real(c.schedule.gamma) << '\n';
    out << "eta=" << format_real(c.schedule.eta) << '\n';
  }
  if (c.schedule.epoch_length > 0)
    out << "granularity=epoch:" << c.schedule.epoch_length << '\n';
  else
    out << "granularity=iter\n";
  out << "compressor=" << c.compressor << '\n';
  out << "problem=" << c.problem.generator << '\n';
  out << "heterogeneity=" << format_real(c.problem.heterogeneity) << '\n';
  out << "condition=" << format_real(c.problem.condition) << '\n';
  out << "samples-per-client=" << c.problem.samples_per_client << '\n';
  out << "sorted-fraction=" << format_real(c.problem.sorted_fraction) << '\n';
  out << "lambda=" << format_real(c.problem.lambda) << '\n';
  out << "sigma-g=" << format_real(c.problem.noise.sigma_g) << '\n';
  out << "sigma-h=" << format_real(c.problem.noise.sigma_h) << '\n';
  out << "seed=" << c.master_seed << '\n';
  out << "problem-seed=" << c.problem.seed << '\n';
  out << "init-scale=" << format_real(c.init_scale) << '\n';
  out << "record-stride=" << c.record_stride << '\n';
  out << "rhm-independent-batch=" << (c.rhm_independent_batch ? "true" : "false") << '\n';
  out << "threads=" << c.threads << '\n';
  out << "format=" << inv.format << '\n';
  if (!c.trace_messages.empty()) out << "trace-messages=" << c.trace_messages << '\n';
  if (inv.subcommand == Subcommand::Compare) {
    out << "methods=";
    for (std::size_t k = 0; k < inv.methods.size(); ++k)
      out << (k ? "," : "") << to_string(inv.methods[k]);
    out << "\nseeds=";
    for (std::size_t k = 0; k < inv.seeds.size(); ++k) out << (k ? "," : "") << inv.seeds[k];
    out << "\neps=" << format_real(inv.compare.eps) << '\n';
    out << "parallel-runs=" << inv.compare.parallel_runs << '\n';
    if (inv.compare.window.t_min) out << "fit-min=" << inv.compare.window.t_min << '\n';
    if (inv.compare.window.t_max) out << "fit-max=" << inv.compare.window.t_max << '\n';
    out << "aggregation="
        << (inv.compare.aggregation == Aggregation::RunningMin ? "min" : "weighted") << '\n';
  }
  return out.str();
}

namespace {

struct Parser {
  CLI::App app{"Normalized EF21 with momentum: simulation and verification harness",
               "normef"};
  std::map<std::string, Settings> flags;  // per subcommand
  std::map<std::string, std::string> config_paths;

  Parser() {
    app.require_subcommand(1);
    app.set_help_flag("-h,--help", "print this help");
    add("run", "run one experiment and write its trajectory", false);
    add("compare", "run several methods over several seeds and fit rates", true);
    add("audit", "run a noiseless experiment and check the descent inequality", false);
    add("selftest", "run the built-in consistency checks", false);
  }

  void add(const std::string& name, const std::string& description, bool compare) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option_function<std::string>(
        "--config", [this, name](const std::string& v) { config_paths[name] = v; },
        "key=value file; flags take precedence");
    sub->add_option_function<std::string>(
        "--out", [this, name](const std::string& v) { flags[name]["out"] = v; },
        "output path (default: standard output)");
    for (const KeyInfo& k : kRunKeys) {
      std::string key = k.name;
      sub->add_option_function<std::string>(
          "--" + key, [this, name, key](const std::string& v) { flags[name][key] = v; }, k.help);
    }
    if (compare) {
      for (const KeyInfo& k : kCompareKeys) {
        std::string key = k.name;
        sub->add_option_function<std::string>(
            "--" + key, [this, name, key](const std::string& v) { flags[name][key] = v; },
            k.help);
      }
    }
  }
};

}  // namespace

std::string usage_text() {
  Parser parser;
  return parser.app.help();
}

CliInvocation parse_and_validate(int argc, const char* const* argv) {
  Parser parser;
  try {
    parser.app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto chosen = parser.app.get_subcommands();
    throw HelpRequest(chosen.empty() ? parser.app.help() : chosen.front()->help());
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  CLI::App* chosen = parser.app.get_subcommands().front();
  const std::string name = chosen->get_name();
  Subcommand sub = Subcommand::Run;
  if (name == "compare") sub = Subcommand::Compare;
  if (name == "audit") sub = Subcommand::Audit;
  if (name == "selftest") sub = Subcommand::Selftest;

  Settings merged;
  std::string config_path;
  if (auto it = parser.config_paths.find(name); it != parser.config_paths.end()) {
    config_path = it->second;
    merged = read_settings_file(config_path);
  }
  for (const auto& [key, value] : parser.flags[name]) merged[key] = value;

  if (sub == Subcommand::Selftest) {
    CliInvocation inv;
    inv.subcommand = sub;
    return inv;
  }
  CliInvocation inv = resolve(sub, merged);
  inv.config_path = config_path;
  return inv;
}

}  // namespace normef
