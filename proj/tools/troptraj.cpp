/*
 * Copyright 2026 The troptraj Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


// troptraj command line: solve, oracle, reproduce, audit, prune-checkpoint.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "troptraj/config.hpp"
#include "troptraj/experiments.hpp"
#include "troptraj/io.hpp"
#include "troptraj/parallel.hpp"

namespace fs = std::filesystem;
using namespace troptraj;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool quiet = false;
};

void add_common(CLI::App *cmd, Common &c, bool needs_config) {
  auto *opt = cmd->add_option("--config", c.config, "Run config (TOML or JSON)");
  if (needs_config)
    opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--override", c.overrides, "Dotted key=value override")
      ->allow_extra_args(false);
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--seed", c.seed, "Run seed (overrides the config)");
  cmd->add_option("--threads", c.threads,
                  "Worker threads (default from TROPTRAJ_THREADS, else 1)")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("-q,--quiet", c.quiet, "No per-iteration progress");
}

LoadedConfig load(const Common &c) {
  std::vector<std::string> overrides = c.overrides;
  if (c.seed)
    overrides.push_back("seed=" + std::to_string(*c.seed));
  if (!c.out.empty())
    overrides.push_back("outputs.directory=\"" + c.out + "\"");
  return load_run_config(c.config, overrides);
}

void apply_threads(const Common &c) {
  if (c.threads)
    set_thread_count(*c.threads);
}

void print(const nlohmann::json &j) { std::cout << j.dump(2) << "\n"; }

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Trajectory-based max-plus value function solver"};
  app.require_subcommand(1);

  Common solve_opts;
  auto *solve = app.add_subcommand("solve", "Run the solver on a config");
  add_common(solve, solve_opts, true);

  Common oracle_opts;
  std::string oracle_kind = "riccati";
  std::string oracle_checkpoint;
  OracleRequest request;
  std::string boundary = "exclude";
  auto *oracle = app.add_subcommand("oracle", "Run a verification oracle");
  add_common(oracle, oracle_opts, true);
  oracle->add_option("--kind", oracle_kind, "riccati, grid or direct")
      ->check(CLI::IsMember({"riccati", "grid", "direct"}));
  oracle->add_option("--checkpoint", oracle_checkpoint,
                     "Solver checkpoint to compare against")
      ->check(CLI::ExistingFile);
  oracle->add_option("--state-lower", request.state_lower, "Grid state box lower edge")
      ->capture_default_str();
  oracle->add_option("--state-upper", request.state_upper, "Grid state box upper edge")
      ->capture_default_str();
  oracle->add_option("--state-nodes", request.state_nodes, "Grid nodes per state axis")
      ->capture_default_str();
  oracle->add_option("--control-lower", request.control_lower, "Grid control lower edge")
      ->capture_default_str();
  oracle->add_option("--control-upper", request.control_upper, "Grid control upper edge")
      ->capture_default_str();
  oracle->add_option("--control-nodes", request.control_nodes, "Grid nodes per control axis")
      ->capture_default_str();
  oracle->add_option("--boundary", boundary, "reject, clip or exclude")
      ->check(CLI::IsMember({"reject", "clip", "exclude"}));
  oracle->add_option("--r0", request.r0, "Direct oracle terminal rank");
  oracle->add_option("--rank", request.R, "Direct oracle interaction rank");

  Common repro_opts;
  std::string figure;
  std::string scale = "desk";
  auto *repro =
      app.add_subcommand("reproduce", "Run a figure preset and write a bundle");
  add_common(repro, repro_opts, false);
  repro->add_option("figure", figure, "circle5, circle10, annulus30, large100")
      ->required()
      ->check(CLI::IsMember({"circle5", "circle10", "annulus30", "large100"}));
  repro->add_option("--scale", scale, "paper or desk")
      ->check(CLI::IsMember({"paper", "desk"}));

  Common audit_opts;
  std::string audit_checkpoint;
  auto *audit = app.add_subcommand("audit", "Audit a checkpoint");
  add_common(audit, audit_opts, true);
  audit->add_option("--checkpoint", audit_checkpoint, "Solver checkpoint")
      ->required()
      ->check(CLI::ExistingFile);

  Common prune_opts;
  std::string prune_input;
  auto *prune =
      app.add_subcommand("prune-checkpoint", "Prune the tables of a checkpoint");
  add_common(prune, prune_opts, true);
  prune->add_option("--checkpoint", prune_input, "Solver checkpoint")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      apply_threads(solve_opts);
      const LoadedConfig loaded = load(solve_opts);
      const fs::path out = loaded.config.outputs.directory;
      const RunReport report = solve_bundle(loaded.config, out, &loaded,
                                            solve_opts.quiet ? nullptr : &std::cerr);
      std::cout << "wrote " << out.string() << "  v(x0) = "
                << report.state.value_at_x0()
                << "  monotone = " << (report.monotone ? "yes" : "no")
                << "  audit = " << (report.audit.ok() ? "ok" : "FAILED") << "\n";
      return report.audit.ok() && report.monotone ? 0 : 3;
    }
    if (*oracle) {
      apply_threads(oracle_opts);
      const LoadedConfig loaded = load(oracle_opts);
      request.kind = oracle_kind_from_string(oracle_kind);
      if (!oracle_checkpoint.empty())
        request.checkpoint = oracle_checkpoint;
      request.boundary = boundary == "reject" ? BoundaryRule::reject
                         : boundary == "clip" ? BoundaryRule::clip
                                              : BoundaryRule::exclude;
      const fs::path out = oracle_opts.out.empty()
                               ? fs::path(loaded.config.outputs.directory) /
                                     ("oracle_" + oracle_kind)
                               : fs::path(oracle_opts.out);
      print(run_oracle(loaded.config, request, out));
      return 0;
    }
    if (*repro) {
      apply_threads(repro_opts);
      const fs::path out = repro_opts.out.empty()
                               ? fs::path(figure + "_" + scale)
                               : fs::path(repro_opts.out);
      std::vector<std::string> overrides = repro_opts.overrides;
      overrides.push_back("outputs.directory=\"" + out.string() + "\"");
      const auto summary =
          reproduce(figure, scale, out, repro_opts.seed.value_or(0), overrides,
                    repro_opts.quiet ? nullptr : &std::cerr);
      print(summary);
      return summary["audit"]["ok"].get<bool>() &&
                     summary["value_monotone"].get<bool>()
                 ? 0
                 : 3;
    }
    if (*audit) {
      apply_threads(audit_opts);
      const LoadedConfig loaded = load(audit_opts);
      const ProblemSetup setup = build_setup(loaded.config);
      const SolverState state =
          solver_state_from_json(read_json_file(audit_checkpoint));
      check_checkpoint_matches(setup, state);
      const PostRunAudit result = audit_state(loaded.config, setup, state);
      print(to_json(result));
      return result.ok() ? 0 : 3;
    }
    if (*prune) {
      apply_threads(prune_opts);
      const LoadedConfig loaded = load(prune_opts);
      const fs::path out = prune_opts.out.empty()
                               ? fs::path(loaded.config.outputs.directory)
                               : fs::path(prune_opts.out);
      print(prune_checkpoint(loaded.config, prune_input, out));
      return 0;
    }
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantViolation &e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 4;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
