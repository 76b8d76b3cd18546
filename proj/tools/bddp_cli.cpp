// Copyright 2026 The bddp Authors
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

// Command-line front end: load a JSON config, build the domain, run
// solve / rollout / check, and write trajectory and diagnostics artifacts
// for external plotting. Exit status 0 on success (including solver
// non-convergence, which is recorded in the report), 2 on config or
// prerequisite errors, 3 on I/O failures.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bddp/bddp.hpp"

namespace {

namespace fs = std::filesystem;

struct CliArgs {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string stages;  // comma list overriding the shaping schedule
};

fs::path resolve_out(const CliArgs& args) {
  if (!args.out.empty()) return args.out;
  fs::path root = ".";
  if (const char* env = std::getenv("BDDP_OUT_ROOT")) root = env;
  return root / "bddp_out";
}

std::vector<double> parse_stage_list(const std::string& s) {
  std::vector<double> out;
  size_t pos = 0;
  while (pos <= s.size()) {
    const size_t comma = std::min(s.find(',', pos), s.size());
    const std::string tok = s.substr(pos, comma - pos);
    try {
      size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw bddp::ConfigError("--stages: \"" + tok + "\" is not a number");
    }
    pos = comma + 1;
  }
  return out;
}

bddp::RunConfig load_and_override(const CliArgs& args) {
  bddp::RunConfig cfg = bddp::load_config(args.config_path);
  if (!args.out.empty()) cfg.output_dir = args.out;
  if (args.seed) cfg.rollout.seed_base = *args.seed;
  if (!args.stages.empty()) {
    cfg.schedule = parse_stage_list(args.stages);
    for (double v : cfg.schedule) {
      if (!(v > 0.0)) throw bddp::ConfigError("--stages: values must be positive");
    }
    if (cfg.domain != "hand_eye") {
      throw bddp::ConfigError("--stages: shaping schedule is only defined for hand_eye");
    }
  }
  return cfg;
}

fs::path effective_out(const CliArgs& args, const bddp::RunConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return resolve_out(args);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Belief-space trajectory optimization under unilateral constraints"};
  app.require_subcommand(1);

  CliArgs args;
  auto add_common = [&args](CLI::App* sub, bool with_seed) {
    sub->add_option("config", args.config_path, "JSON config file")->required();
    sub->add_option("--out", args.out, "output directory (default: $BDDP_OUT_ROOT/bddp_out)");
    sub->add_option("--stages", args.stages, "comma list overriding the shaping schedule");
    if (with_seed) {
      sub->add_option("--seed", args.seed, "override the rollout seed base");
    }
  };

  CLI::App* solve_cmd = app.add_subcommand("solve", "plan a nominal trajectory and policy");
  add_common(solve_cmd, false);
  CLI::App* rollout_cmd =
      app.add_subcommand("rollout", "run seeded closed-loop rollouts of a solved policy");
  add_common(rollout_cmd, true);
  CLI::App* check_cmd = app.add_subcommand("check", "validate a config without running");
  add_common(check_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const bddp::RunConfig cfg = load_and_override(args);
    if (check_cmd->parsed()) {
      std::cout << bddp::run_check(cfg);
      return 0;
    }
    const fs::path out = effective_out(args, cfg);
    if (solve_cmd->parsed()) {
      const bddp::DdpResult res = bddp::run_solve(cfg, out);
      std::cout << "solve: converged=" << (res.converged ? "true" : "false")
                << " iterations=" << res.iterations << " total_reward=" << res.total_reward
                << "\nartifacts: " << out.string() << "\n";
      return 0;
    }
    const auto records = bddp::run_rollout(cfg, out);
    int failed = 0;
    for (const auto& r : records) failed += r.estimator_failed ? 1 : 0;
    std::cout << "rollout: seeds=" << records.size() << " estimator_failures=" << failed
              << "\nartifacts: " << out.string() << "\n";
    return 0;
  } catch (const bddp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const bddp::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
