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


#include "troptraj/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "troptraj/io.hpp"
#include "troptraj/nbody.hpp"
#include "troptraj/parallel.hpp"

namespace troptraj {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json csv_headers(const NBodyParams &p) {
  return {{"value_vs_iteration.csv", kValueCsvHeader},
          {"rank_vs_iteration.csv", kRankCsvHeader},
          {"trajectory.csv", trajectory_csv_header(p)},
          {"radii.csv", kRadiiCsvHeader}};
}

bool nondecreasing(const RunHistory &h) {
  for (std::size_t i = 1; i < h.records.size(); ++i)
    if (!(h.records[i].value_at_x0 >= h.records[i - 1].value_at_x0))
      return false;
  return true;
}

NBodyParams interaction_free(NBodyParams p) {
  p.kappa = 0.0;
  return p;
}

} // namespace

Vector initial_state(const RunConfig &config) {
  const auto &is = config.initial_state;
  switch (is.kind) {
  case InitialStateKind::circle:
    return circle_state(config.problem, is.radius);
  case InitialStateKind::annulus:
    return annulus_state(config.problem, is.r_min, is.r_max,
                         is.seed.value_or(config.seed));
  case InitialStateKind::explicit_state:
    break;
  }
  return Eigen::Map<const Vector>(is.state.data(), Eigen::Index(is.state.size()));
}

ProblemSetup build_setup(const RunConfig &config) {
  config.validate();
  const auto &s = config.solver;
  ProblemSetup setup;
  SampledCurvature sampled;
  sampled.seed = config.seed;
  sampled.count = s.sampled_count;
  sampled.box = s.sampled_box;
  sampled.safety = s.sampled_safety;
  setup.gamma_h = curvature_gamma(config.problem, s.curvature, sampled);
  setup.certified = s.curvature != CurvatureMode::sampled;
  setup.gamma_label = std::string(to_string(s.curvature)) +
                      (setup.certified ? " (certified)" : " (uncertified)");
  setup.problem =
      make_nbody_problem(config.problem, setup.gamma_h, setup.gamma_label);
  setup.problem.schedule = s.schedule;
  setup.x0 = initial_state(config);
  return setup;
}

SolverOptions solver_options(const RunConfig &config) {
  const auto &s = config.solver;
  const auto n = Eigen::Index(config.problem.state_dim());
  SolverOptions o;
  o.dedup_tol = s.dedup_tol;
  o.freshness = s.freshness;
  o.prune_every = s.prune_every;
  o.probes.include_seeds = true;
  o.probes.perturbations_per_seed = s.probe_perturbations;
  o.probes.sigma = s.probe_sigma;
  o.probes.uniform_count = s.probe_uniform;
  o.probes.box_lower = Vector::Constant(n, -s.probe_box);
  o.probes.box_upper = Vector::Constant(n, s.probe_box);
  o.probes.max_probes = s.probe_max;
  o.early_stop = s.early_stop;
  return o;
}

SolverState initial_solver_state(const RunConfig &config,
                                 const ProblemSetup &setup) {
  const auto &s = config.solver;
  const auto n = Eigen::Index(config.problem.state_dim());
  InitMode init_mode = ZeroControl{};
  if (s.init == InitKind::constant)
    init_mode = ConstantControl{Vector::Constant(n, s.init_control)};
  else if (s.init == InitKind::lqr)
    init_mode = CustomTrajectory{riccati_solve(interaction_free(config.problem))
                                     .rollout(setup.problem, setup.x0)};
  BoundMode bound = MinusInfinityBound{};
  if (s.bound == BoundKind::constant)
    bound = CertifiedConstantBound{s.bound_value};
  return init(setup.problem, setup.x0, config.problem.K, init_mode, bound,
              config.seed);
}

void check_checkpoint_matches(const ProblemSetup &setup,
                              const SolverState &state) {
  const std::size_t n = setup.problem.state_dim();
  if (state.x0.size() != Eigen::Index(n) || state.tables.empty() ||
      state.tables.front().dim() != n)
    throw ConfigError("checkpoint state dimension does not match the config");
  const CurvatureSchedule expected =
      problem_schedule(setup.problem, state.steps());
  if (expected.c.size() != state.schedule.c.size())
    throw ConfigError("checkpoint horizon does not match the config");
  for (std::size_t k = 0; k < expected.c.size(); ++k)
    if (std::abs(expected.c[k] - state.schedule.c[k]) >
        1e-12 * std::max(1.0, expected.c[k]))
      throw ConfigError("checkpoint curvature schedule does not match the "
                        "config at step " +
                        std::to_string(k));
}

PostRunAudit audit_state(const RunConfig &config, const ProblemSetup &setup,
                         const SolverState &state) {
  PostRunAudit audit;
  const SampleBox box = trajectory_box(state.trajectory, 1.0);
  if (config.solver.audit_samples > 0)
    audit.validity = support_validity_audit(setup.problem, state, box,
                                            config.solver.audit_samples,
                                            config.seed);
  if (config.solver.subsolution_samples > 0)
    audit.subsolution = bellman_subsolution_check(
        setup.problem, state, box, config.solver.subsolution_samples,
        config.seed);
  return audit;
}

json to_json(const PostRunAudit &audit) {
  return {{"ok", audit.ok()},
          {"profile_checks", audit.validity.profile_checks},
          {"profile_violations", audit.validity.profile_violations.size()},
          {"max_profile_excess", number(audit.validity.max_profile_excess)},
          {"subsolution_checks", audit.subsolution.checks},
          {"subsolution_max_excess", number(audit.subsolution.max_excess)},
          {"subsolution_worst_k", audit.subsolution.worst_k},
          {"subsolution_slack", audit.subsolution_slack}};
}

RunReport solve_bundle(const RunConfig &config, const fs::path &out_dir,
                       const LoadedConfig *source, std::ostream *log) {
  RunReport report;
  report.setup = build_setup(config);
  report.state = initial_solver_state(config, report.setup);
  SolverOptions options = solver_options(config);
  options.violation_checkpoint = (out_dir / "violation_checkpoint.json").string();
  options.verbose = log != nullptr;

  fs::create_directories(out_dir);
  std::vector<std::string> files;
  if (source) {
    const std::string name =
        source->format == ConfigFormat::json ? "config.json" : "config.toml";
    write_text_atomic(out_dir / name, source->source_text);
    files.push_back(name);
    write_json_atomic(out_dir / "resolved_config.json", to_json(config));
    files.push_back("resolved_config.json");
  } else {
    write_json_atomic(out_dir / "config.json", to_json(config));
    files.push_back("config.json");
  }

  if (log)
    *log << "curvature gamma_h = " << report.setup.gamma_h << " ["
         << report.setup.gamma_label << "], schedule "
         << to_string(config.solver.schedule) << ", c_0 = "
         << report.state.schedule[0] << "\n";

  const auto start = std::chrono::steady_clock::now();
  run(report.setup.problem, report.state, config.solver.M, options);
  report.audit = audit_state(config, report.setup, report.state);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  report.monotone = nondecreasing(report.state.history);

  const NBodyParams &p = config.problem;
  write_text_atomic(out_dir / "value_vs_iteration.csv",
                    value_csv(report.state.history));
  files.push_back("value_vs_iteration.csv");
  write_text_atomic(out_dir / "rank_vs_iteration.csv",
                    rank_csv(report.state.history));
  files.push_back("rank_vs_iteration.csv");
  if (config.outputs.trajectory) {
    write_text_atomic(out_dir / "trajectory.csv",
                      trajectory_csv(report.state.trajectory, p));
    files.push_back("trajectory.csv");
  }
  if (config.outputs.radii) {
    write_text_atomic(out_dir / "radii.csv",
                      radii_csv(report.state.trajectory, p));
    files.push_back("radii.csv");
  }
  if (config.outputs.checkpoint) {
    write_json_atomic(out_dir / "checkpoint.json", to_json(report.state), -1);
    files.push_back("checkpoint.json");
  }
  files.push_back("manifest.json");

  const auto &last = report.state.history.records.back();
  report.manifest = {
      {"format", "troptraj-manifest"},
      {"schema_version", kCsvSchemaVersion},
      {"config", to_json(config)},
      {"overrides", source ? json(source->overrides) : json::array()},
      {"seed", config.seed},
      {"threads", thread_count()},
      {"curvature",
       {{"gamma_h", report.setup.gamma_h},
        {"label", report.setup.gamma_label},
        {"certified", report.setup.certified},
        {"schedule", to_string(config.solver.schedule)},
        {"c_0", report.state.schedule[0]}}},
      {"iterations", report.state.iteration},
      {"value_at_x0", number(last.value_at_x0)},
      {"value_monotone", report.monotone},
      {"audit", to_json(report.audit)},
      {"wall_seconds", report.wall_seconds},
      {"build", build_info()},
      {"csv_headers", csv_headers(p)},
      {"files", files}};
  write_json_atomic(out_dir / "manifest.json", report.manifest);
  return report;
}

RunConfig reproduce_config(std::string_view figure, std::string_view scale,
                           std::uint64_t seed) {
  if (scale != "paper" && scale != "desk")
    throw ConfigError("scale must be 'paper' or 'desk'");
  RunConfig c;
  c.seed = seed;
  if (figure == "circle5" || figure == "circle10") {
    c.problem.N = figure == "circle5" ? 5 : 10;
    c.initial_state.kind = InitialStateKind::circle;
    c.initial_state.radius = 10.0;
  } else if (figure == "annulus30" || figure == "large100") {
    c.problem.N = figure == "annulus30" ? 30 : 100;
    c.initial_state.kind = InitialStateKind::annulus;
    c.initial_state.r_min = 1.0;
    c.initial_state.r_max = 2.0;
  } else {
    throw ConfigError("unknown figure id '" + std::string(figure) +
                      "' (circle5, circle10, annulus30, large100)");
  }
  if (scale == "paper") {
    c.problem.h = 0.01;
    c.problem.K = 2000;
    c.solver.M = 500;
  } else {
    c.problem.h = 0.04;
    c.problem.K = 500;
    c.solver.M = figure == "large100" ? 50 : 100;
  }
  c.problem.T = double(c.problem.K) * c.problem.h;
  c.solver.prune_every = 25;
  c.solver.probe_max = 4096;
  c.solver.probe_sigma = 0.5;
  c.solver.curvature = CurvatureMode::pairwise;
  c.solver.schedule = ScheduleKind::control_aware;
  c.solver.init = InitKind::lqr;
  c.outputs.directory = std::string(figure) + "_" + std::string(scale);
  c.validate();
  return c;
}

json reproduce(std::string_view figure, std::string_view scale,
               const fs::path &out_dir, std::uint64_t seed,
               std::span<const std::string> overrides, std::ostream *log) {
  RunConfig config = reproduce_config(figure, scale, seed);
  LoadedConfig echo;
  const LoadedConfig *source = nullptr;
  if (!overrides.empty()) {
    json doc = to_json(config);
    for (const auto &o : overrides) {
      apply_override(doc, o);
      echo.overrides.push_back(o);
    }
    config = run_config_from_json(doc);
  }
  echo.config = config;
  echo.format = ConfigFormat::json;
  echo.source_text = to_json(config).dump(1) + "\n";
  source = &echo;

  const RunReport report = solve_bundle(config, out_dir, source, log);
  const RadiiDiagnostics rd =
      radii_diagnostics(report.state.trajectory, config.problem);
  json summary = {
      {"figure", figure},
      {"scale", scale},
      {"N", config.problem.N},
      {"K", config.problem.K},
      {"h", config.problem.h},
      {"M", config.solver.M},
      {"seed", seed},
      {"plateau_radius", rd.plateau_radius},
      {"plateau_dispersion", rd.plateau_dispersion},
      {"dispersion_ratio", rd.plateau_dispersion / rd.plateau_radius},
      {"initial_mean_radius", rd.mean_radius.front()},
      {"final_mean_radius", rd.mean_radius.back()},
      {"turnpike_scale", turnpike_scale(config.problem)},
      {"value_monotone", report.monotone},
      {"value_at_x0", number(report.state.value_at_x0())},
      {"realized_reward", number(report.state.trajectory.realized_reward)},
      {"audit", to_json(report.audit)},
      {"gamma_h", report.setup.gamma_h},
      {"gamma_label", report.setup.gamma_label},
      {"wall_seconds", report.wall_seconds}};
  write_json_atomic(out_dir / "summary.json", summary);
  return summary;
}

OracleKind oracle_kind_from_string(std::string_view name) {
  if (name == "riccati")
    return OracleKind::riccati;
  if (name == "grid")
    return OracleKind::grid;
  if (name == "direct")
    return OracleKind::direct;
  throw ConfigError("unknown oracle '" + std::string(name) +
                    "' (riccati, grid, direct)");
}

json run_oracle(const RunConfig &config, const OracleRequest &request,
                const fs::path &out_dir) {
  fs::create_directories(out_dir);
  const NBodyParams &p = config.problem;
  json report;
  std::optional<SolverState> state;
  ProblemSetup setup;
  if (request.kind != OracleKind::direct)
    setup = build_setup(config);
  if (request.checkpoint) {
    if (request.kind == OracleKind::direct)
      throw ConfigError("the direct oracle does not compare checkpoints");
    state = solver_state_from_json(read_json_file(*request.checkpoint));
    check_checkpoint_matches(setup, *state);
  }

  switch (request.kind) {
  case OracleKind::riccati: {
    if (p.kappa != 0.0)
      throw ConfigError("riccati oracle needs problem.kappa = 0");
    const RiccatiSolution sol = riccati_solve(p);
    const Trajectory traj = sol.rollout(setup.problem, setup.x0);
    write_text_atomic(out_dir / "riccati.csv", riccati_csv(sol));
    write_text_atomic(out_dir / "trajectory.csv", trajectory_csv(traj, p));
    write_text_atomic(out_dir / "radii.csv", radii_csv(traj, p));
    report = {{"oracle", "riccati"},
              {"value_at_x0", sol.value(0, setup.x0)},
              {"realized_reward", traj.realized_reward},
              {"residual", sol.residual(p)},
              {"rows", sol.gain.size()}};
    if (state) {
      double worst = kMinusInfinity;
      std::size_t violations = 0;
      double dev = 0.0;
      for (std::size_t k = 0; k <= state->steps(); ++k) {
        if (k < state->trajectory.states.size())
          dev = std::max(dev, (state->trajectory.states[k] - traj.states[k])
                                  .lpNorm<Eigen::Infinity>());
        if (state->tables[k].empty())
          continue;
        for (const Vector &x : {state->trajectory.states[k], traj.states[k]}) {
          const double lhs = state->tables[k].eval(x).value;
          const double rhs = sol.value(k, x);
          worst = std::max(worst, lhs - rhs);
          if (lhs - rhs > 1e-9 * (1.0 + std::abs(rhs)))
            ++violations;
        }
      }
      report["comparison"] = {
          {"gap_at_x0", sol.value(0, setup.x0) - state->value_at_x0()},
          {"ordering_violations", violations},
          {"max_ordering_excess", number(worst)},
          {"max_trajectory_deviation", dev}};
    }
    break;
  }
  case OracleKind::grid: {
    const std::size_t n = p.state_dim();
    if (n > 3)
      throw ConfigError("grid oracle needs state dimension <= 3, got " +
                        std::to_string(n));
    GridOptions go;
    go.boundary = request.boundary;
    go.state_axes.assign(
        n, GridAxis{request.state_lower, request.state_upper, request.state_nodes});
    go.control_axes.assign(n, GridAxis{request.control_lower,
                                       request.control_upper,
                                       request.control_nodes});
    const GridValue grid = grid_value_iteration(setup.problem, p.K, go);
    write_text_atomic(out_dir / "grid_values.csv", grid_values_csv(grid));
    write_text_atomic(out_dir / "grid_tolerance.csv",
                      grid_tolerance_csv(grid, p.h));
    report = {{"oracle", "grid"},
              {"value_at_x0", grid.value(0, setup.x0)},
              {"tolerance_0", grid.tolerance.front()},
              {"clip_count", grid.clip_count},
              {"excluded_count", grid.excluded_count},
              {"binding_count", grid.binding_count},
              {"acceptance_usable",
               grid.clip_count == 0 && grid.binding_count == 0}};
    if (state) {
      const AuditReport audit = support_validity_audit(
          setup.problem, *state, trajectory_box(state->trajectory, 1.0), 0,
          config.seed, &grid);
      report["comparison"] = {
          {"gap_at_x0", grid.value(0, setup.x0) - state->value_at_x0()},
          {"ordering_checks", audit.oracle_checks},
          {"ordering_violations", audit.oracle_violations.size()},
          {"max_ordering_excess", number(audit.max_oracle_excess)}};
    }
    break;
  }
  case OracleKind::direct: {
    if (p.K > 6)
      throw ConfigError("direct oracle needs problem.K <= 6");
    const SeparableQuadraticProblem prob =
        direct_propagation_example(p, request.r0, request.R);
    json trace;
    try {
      const DirectPropagation dp = direct_propagation(prob, p.K);
      write_text_atomic(out_dir / "rank_trace.csv", rank_trace_csv(dp));
      trace = dp.rank_trace;
      report["complete"] = true;
    } catch (const RankBudgetExceeded &e) {
      trace = e.trace;
      report["complete"] = false;
      report["error"] = e.what();
    }
    std::vector<std::size_t> expected;
    std::size_t r = request.r0;
    for (std::size_t k = 0; k <= p.K; ++k, r *= request.R)
      expected.push_back(r);
    report["oracle"] = "direct";
    report["r0"] = request.r0;
    report["R"] = request.R;
    report["rank_trace"] = trace;
    report["worst_case_trace"] = expected;
    break;
  }
  }
  write_json_atomic(out_dir / "report.json", report);
  return report;
}

json prune_checkpoint(const RunConfig &config, const fs::path &checkpoint,
                      const fs::path &out_dir) {
  const ProblemSetup setup = build_setup(config);
  SolverState state = solver_state_from_json(read_json_file(checkpoint));
  check_checkpoint_matches(setup, state);
  std::size_t before = 0;
  for (const auto &t : state.tables)
    before += t.rank();
  const std::size_t removed =
      prune_tables(setup.problem, state, solver_options(config));
  fs::create_directories(out_dir);
  write_json_atomic(out_dir / "checkpoint.json", to_json(state), -1);
  const json report = {{"supports_before", before},
                       {"supports_removed", removed},
                       {"supports_after", before - removed},
                       {"value_at_x0", number(state.value_at_x0())}};
  write_json_atomic(out_dir / "prune_report.json", report);
  return report;
}

} // namespace troptraj
