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


#ifndef TROPTRAJ_EXPERIMENTS_HPP
#define TROPTRAJ_EXPERIMENTS_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "troptraj/config.hpp"
#include "troptraj/oracles.hpp"
#include "troptraj/solver.hpp"

namespace troptraj {

struct ProblemSetup {
  ControlProblem problem;
  double gamma_h = 0.0;
  std::string gamma_label;
  bool certified = true;
  Vector x0;
};

Vector initial_state(const RunConfig &config);
ProblemSetup build_setup(const RunConfig &config);
SolverOptions solver_options(const RunConfig &config);
SolverState initial_solver_state(const RunConfig &config,
                                 const ProblemSetup &setup);

/// Throws ConfigError when the checkpoint was not produced by this config.
void check_checkpoint_matches(const ProblemSetup &setup,
                              const SolverState &state);

struct PostRunAudit {
  AuditReport validity;
  SubsolutionReport subsolution;
  /// Slack allowed on the subsolution inequality.
  double subsolution_slack = 1e-8;
  bool ok() const {
    return validity.ok() && !(subsolution.max_excess > subsolution_slack);
  }
};

/// Validity audit and subsolution check over the trajectory box widened by
/// one unit, sample counts from the config (0 skips a check).
PostRunAudit audit_state(const RunConfig &config, const ProblemSetup &setup,
                         const SolverState &state);
nlohmann::json to_json(const PostRunAudit &audit);

struct RunReport {
  ProblemSetup setup;
  SolverState state;
  PostRunAudit audit;
  bool monotone = false;
  double wall_seconds = 0.0;
  nlohmann::json manifest;
};

/// Runs the solver and writes the bundle: config echo, CSVs, checkpoint and
/// manifest. `source` supplies the verbatim config text when loaded from a
/// file; otherwise the resolved config is echoed as config.json.
RunReport solve_bundle(const RunConfig &config,
                       const std::filesystem::path &out_dir,
                       const LoadedConfig *source = nullptr,
                       std::ostream *log = nullptr);

inline constexpr std::string_view kFigureIds[] = {"circle5", "circle10",
                                                  "annulus30", "large100"};

/// Preset for a figure at "paper" or "desk" scale. Throws ConfigError for
/// unknown ids.
RunConfig reproduce_config(std::string_view figure, std::string_view scale,
                           std::uint64_t seed = 0);

/// solve_bundle on the preset plus summary.json; returns the summary.
nlohmann::json reproduce(std::string_view figure, std::string_view scale,
                         const std::filesystem::path &out_dir,
                         std::uint64_t seed,
                         std::span<const std::string> overrides = {},
                         std::ostream *log = nullptr);

enum class OracleKind { riccati, grid, direct };

struct OracleRequest {
  OracleKind kind = OracleKind::riccati;
  std::optional<std::filesystem::path> checkpoint;
  // grid: the same axis for every state / control coordinate
  double state_lower = -5.0;
  double state_upper = 5.0;
  std::size_t state_nodes = 2001;
  double control_lower = -40.0;
  double control_upper = 40.0;
  std::size_t control_nodes = 801;
  BoundaryRule boundary = BoundaryRule::exclude;
  // direct propagation
  std::size_t r0 = 2;
  std::size_t R = 3;
};

OracleKind oracle_kind_from_string(std::string_view name);

/// Writes the oracle CSVs and report.json; returns the report.
nlohmann::json run_oracle(const RunConfig &config, const OracleRequest &request,
                          const std::filesystem::path &out_dir);

/// Prunes a checkpoint with the config's probe settings and writes
/// checkpoint.json plus prune_report.json into out_dir.
nlohmann::json prune_checkpoint(const RunConfig &config,
                                const std::filesystem::path &checkpoint,
                                const std::filesystem::path &out_dir);

} // namespace troptraj

#endif // TROPTRAJ_EXPERIMENTS_HPP
