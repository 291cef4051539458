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


#ifndef TROPTRAJ_CONFIG_HPP
#define TROPTRAJ_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "troptraj/control_model.hpp"
#include "troptraj/nbody.hpp"
#include "troptraj/solver.hpp"

namespace troptraj {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class InitialStateKind { circle, annulus, explicit_state };

struct InitialStateSpec {
  InitialStateKind kind = InitialStateKind::circle;
  double radius = 10.0;
  double r_min = 1.0;
  double r_max = 2.0;
  /// Annulus sampling seed; the run seed when absent.
  std::optional<std::uint64_t> seed;
  std::vector<double> state;

  bool operator==(const InitialStateSpec &) const = default;
};

/// Initial trajectory for the first backward sweep.
enum class InitKind {
  zero,
  constant,
  /// Riccati feedback of the interaction-free problem.
  lqr,
};

enum class BoundKind { minus_infinity, constant };

struct SolverSettings {
  std::size_t M = 500;
  std::size_t prune_every = 25;
  std::size_t probe_perturbations = 8;
  double probe_sigma = 0.5;
  std::size_t probe_uniform = 0;
  double probe_box = 10.0;
  std::size_t probe_max = 4096;
  double dedup_tol = kDefaultDedupTolerance;
  SweepFreshness freshness = SweepFreshness::fresh;
  InitKind init = InitKind::zero;
  double init_control = 0.0;
  BoundKind bound = BoundKind::minus_infinity;
  double bound_value = 0.0;
  CurvatureMode curvature = CurvatureMode::analytic;
  ScheduleKind schedule = ScheduleKind::uniform;
  std::size_t sampled_count = 1000;
  double sampled_box = 10.0;
  double sampled_safety = 1.5;
  bool early_stop = false;
  /// Post-run audit sample counts; 0 disables.
  std::size_t audit_samples = 200;
  std::size_t subsolution_samples = 100;

  bool operator==(const SolverSettings &) const = default;
};

struct OutputSettings {
  std::string directory = "out";
  bool trajectory = true;
  bool radii = true;
  bool checkpoint = true;

  bool operator==(const OutputSettings &) const = default;
};

struct RunConfig {
  NBodyParams problem;
  InitialStateSpec initial_state;
  SolverSettings solver;
  OutputSettings outputs;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
  bool operator==(const RunConfig &) const = default;
};

nlohmann::json to_json(const RunConfig &config);

/// Missing keys take defaults; unknown keys and type mismatches throw
/// ConfigError naming the dotted path. The result is validated.
RunConfig run_config_from_json(const nlohmann::json &j);

enum class ConfigFormat { toml, json };

/// Parses TOML or JSON text into a JSON document.
nlohmann::json parse_config_text(std::string_view text, ConfigFormat format);

/// ".json" files are JSON, everything else TOML.
ConfigFormat config_format_for(const std::filesystem::path &path);

/// Applies "a.b.c=value". The value is read as JSON when it parses as JSON
/// (numbers, true/false, arrays, quoted strings), else as a bare string.
void apply_override(nlohmann::json &doc, std::string_view assignment);

struct LoadedConfig {
  RunConfig config;
  std::string source_text; // file contents, verbatim
  ConfigFormat format = ConfigFormat::toml;
  std::vector<std::string> overrides;
};

LoadedConfig load_run_config(const std::filesystem::path &path,
                             std::span<const std::string> overrides = {});

std::string_view to_string(InitialStateKind v);
std::string_view to_string(InitKind v);
std::string_view to_string(BoundKind v);
std::string_view to_string(CurvatureMode v);
std::string_view to_string(ScheduleKind v);
std::string_view to_string(SweepFreshness v);

} // namespace troptraj

#endif // TROPTRAJ_CONFIG_HPP
