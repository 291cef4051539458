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


// Acceptance gate: one PASS/FAIL line per criterion, tolerances fixed here.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "troptraj/config.hpp"
#include "troptraj/experiments.hpp"
#include "troptraj/io.hpp"
#include "troptraj/nbody.hpp"
#include "troptraj/parallel.hpp"
#include "troptraj/oracles.hpp"
#include "troptraj/solver.hpp"

using namespace troptraj;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kSubsolutionSlack = 1e-8;
constexpr std::size_t kSubsolutionSamples = 100;
constexpr double kConvergenceTol = 1e-4;
constexpr std::size_t kConvergenceIterations = 100;
constexpr double kSeparableTol = 1e-10;
constexpr double kDispersionRatio = 0.10;
constexpr double kDeskMinutes = 5.0;
constexpr double kLargeMinutes = 10.0;
constexpr double kSmallMinutes = 1.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Subsolution {
  std::string run;
  double max_excess;
};
std::vector<Subsolution> g_subsolution;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

NBodyParams params(std::size_t N, std::size_t d, std::size_t K, double h,
                   double kappa) {
  NBodyParams p;
  p.N = N;
  p.d = d;
  p.K = K;
  p.h = h;
  p.T = double(K) * h;
  p.kappa = kappa;
  return p;
}

ControlProblem default_problem(const NBodyParams &p) {
  return make_nbody_problem(p, curvature_gamma(p, CurvatureMode::analytic),
                            "analytic (certified)");
}

void record_subsolution(const std::string &run, const ControlProblem &problem,
                        const SolverState &state) {
  const auto r = bellman_subsolution_check(
      problem, state, trajectory_box(state.trajectory, 1.0),
      kSubsolutionSamples, 2026);
  g_subsolution.push_back({run, r.max_excess});
}

double json_number(const nlohmann::json &j) {
  if (j.is_number())
    return j.get<double>();
  return j.get<std::string>() == "-inf" ? -INFINITY : NAN;
}

// 2-particle desk instance shared by the monotonicity and rank criteria.
struct MonotoneRun {
  bool value_monotone = true;
  std::size_t pointwise_decreases = 0;
  std::size_t pointwise_checks = 0;
  std::size_t rank_violations = 0;
  double seconds = 0.0;
  bool done = false;
};
MonotoneRun g_monotone;

const MonotoneRun &monotone_run() {
  if (g_monotone.done)
    return g_monotone;
  const auto t0 = std::chrono::steady_clock::now();
  const auto p = params(2, 2, 200, 0.05, 1.5);
  const auto problem = default_problem(p);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Vector x0(4);
  for (Eigen::Index i = 0; i < 4; ++i)
    x0[i] = u(rng);
  auto state = init(problem, x0, p.K, ZeroControl{}, MinusInfinityBound{}, 17);

  std::uniform_real_distribution<double> box(-6.0, 6.0);
  std::vector<std::vector<Vector>> probes(p.K + 1);
  for (auto &at_k : probes)
    for (std::size_t s = 0; s < 100; ++s) {
      Vector x(4);
      for (Eigen::Index i = 0; i < 4; ++i)
        x[i] = box(rng);
      at_k.push_back(x);
    }
  auto values = [&](const SolverState &s) {
    std::vector<std::vector<double>> v(p.K + 1);
    for (std::size_t k = 0; k <= p.K; ++k)
      for (const auto &x : probes[k])
        v[k].push_back(s.tables[k].eval(x).value);
    return v;
  };

  auto prev = values(state);
  double prev_v = kMinusInfinity;
  for (std::size_t m = 1; m <= 50; ++m) {
    run(problem, state, 1);
    const double v = state.value_at_x0();
    g_monotone.value_monotone &= v >= prev_v;
    prev_v = v;
    auto now = values(state);
    for (std::size_t k = 0; k <= p.K; ++k)
      for (std::size_t s = 0; s < now[k].size(); ++s) {
        ++g_monotone.pointwise_checks;
        if (now[k][s] < prev[k][s])
          ++g_monotone.pointwise_decreases;
      }
    prev = std::move(now);
    for (std::size_t k = 0; k <= p.K; ++k)
      if (state.tables[k].rank() > state.initial_ranks[k] + m)
        ++g_monotone.rank_violations;
  }
  g_monotone.seconds = seconds_since(t0);
  g_monotone.done = true;
  record_subsolution("monotone", problem, state);
  return g_monotone;
}

Outcome monotone_lower_bounds() {
  const auto &r = monotone_run();
  const bool pass = r.value_monotone && r.pointwise_decreases == 0 &&
                    r.seconds < 60.0 * kSmallMinutes;
  return {pass, fmt::format("value at x0 nondecreasing={}, pointwise decreases "
                            "{}/{}, {:.1f}s (limit {:.0f}s)",
                            r.value_monotone, r.pointwise_decreases,
                            r.pointwise_checks, r.seconds, 60 * kSmallMinutes)};
}

Outcome rank_bound() {
  const auto &r = monotone_run();
  return {r.rank_violations == 0,
          fmt::format("violations of r_k(m) <= r_k(0) + m over 50 iterations x "
                      "201 steps: {}",
                      r.rank_violations)};
}

// 1-D single-particle instance shared by ordering and validity.
struct LineRun {
  NBodyParams p = params(1, 1, 20, 0.05, 1.5);
  ControlProblem problem;
  SolverState state;
  GridValue grid;
  double seconds = 0.0;
  bool done = false;
};
LineRun g_line;

LineRun &line_run() {
  if (g_line.done)
    return g_line;
  const auto t0 = std::chrono::steady_clock::now();
  g_line.problem = default_problem(g_line.p);
  GridOptions g;
  g.state_axes = {GridAxis{-5.0, 5.0, 2001}};
  g.control_axes = {GridAxis{-40.0, 40.0, 801}};
  g.boundary = BoundaryRule::exclude;
  g_line.grid = grid_value_iteration(g_line.problem, g_line.p.K, g);
  g_line.state = init(g_line.problem, Vector::Constant(1, 3.0), g_line.p.K,
                      ZeroControl{}, MinusInfinityBound{}, 5);
  run(g_line.problem, g_line.state, 50);
  g_line.seconds = seconds_since(t0);
  g_line.done = true;
  record_subsolution("line", g_line.problem, g_line.state);
  return g_line;
}

Outcome oracle_ordering() {
  auto &L = line_run();
  std::size_t violations = 0, checks = 0;
  double worst = kMinusInfinity;
  for (std::size_t k = 0; k <= L.p.K; ++k)
    for (std::size_t i = 0; i < L.grid.node_count(); ++i) {
      const double lhs = L.state.tables[k].eval(L.grid.node(i)).value;
      const double rhs = L.grid.values[k][i] + L.grid.tolerance[k];
      worst = std::max(worst, lhs - rhs);
      ++checks;
      if (lhs > rhs)
        ++violations;
    }
  const bool usable = L.grid.clip_count == 0 && L.grid.binding_count == 0;
  return {violations == 0 && usable && L.seconds < 60.0 * kSmallMinutes,
          fmt::format("violations {}/{}, max(table - grid - tol) {:.3e}, grid "
                      "clips {}, binding {}, tol_0 {:.2e}, {:.1f}s",
                      violations, checks, worst, L.grid.clip_count,
                      L.grid.binding_count, L.grid.tolerance[0], L.seconds)};
}

Outcome support_validity() {
  auto &L = line_run();
  const SampleBox box{Vector::Constant(1, -20.0), Vector::Constant(1, 20.0)};
  const auto clean =
      support_validity_audit(L.problem, L.state, box, 1000, 9, &L.grid);
  // Corrupt supports one at a time, beta + 1.
  std::mt19937_64 rng(31);
  std::size_t tried = 0, caught = 0;
  for (std::size_t k = 0; k < L.p.K; ++k) {
    const std::size_t r = L.state.tables[k].rank();
    for (std::size_t rep = 0; rep < 2; ++rep) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(0, r - 1)(rng);
      SolverState bad = L.state;
      bad.tables[k].mutable_support(j).beta += 1.0;
      const auto audit = support_validity_audit(L.problem, bad, box, 1000, 9);
      ++tried;
      for (const auto &v : audit.profile_violations)
        if (v.k == k && v.support == j) {
          ++caught;
          break;
        }
    }
  }
  return {clean.ok() && clean.profile_checks > 0 && caught == tried,
          fmt::format("clean: {} profile checks, {} violations, max excess "
                      "{:.3e}, {} oracle violations; corrupted supports "
                      "detected {}/{}",
                      clean.profile_checks, clean.profile_violations.size(),
                      clean.max_profile_excess, clean.oracle_violations.size(),
                      caught, tried)};
}

Outcome convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto p = params(2, 2, 200, 0.05, 0.0);
  const auto ric = riccati_solve(p);
  const Vector x0 = circle_state(p, 10.0);

  auto solve = [&](ScheduleKind kind) {
    auto problem = default_problem(p);
    problem.schedule = kind;
    auto state = init(problem, x0, p.K, ZeroControl{}, MinusInfinityBound{}, 1);
    std::size_t it = 0;
    double gap = INFINITY, dev = INFINITY;
    while (it < kConvergenceIterations) {
      run(problem, state, 1);
      ++it;
      const auto ref = ric.rollout(problem, x0);
      gap = std::abs(state.value_at_x0() - ric.value(0, x0));
      dev = 0.0;
      for (std::size_t k = 0; k <= p.K; ++k)
        dev = std::max(dev, (state.trajectory.states[k] - ref.states[k])
                                .cwiseAbs()
                                .maxCoeff());
      if (gap <= kConvergenceTol && dev <= kConvergenceTol)
        break;
    }
    return std::tuple{gap, dev, it, problem, state};
  };

  auto [gap, dev, it, problem, state] = solve(ScheduleKind::control_aware);
  record_subsolution("convergence", problem, state);
  auto [ugap, udev, uit, uproblem, ustate] = solve(ScheduleKind::uniform);
  record_subsolution("convergence/uniform", uproblem, ustate);
  const double secs = seconds_since(t0);
  const bool pass = gap <= kConvergenceTol && dev <= kConvergenceTol &&
                    secs < 60.0 * kSmallMinutes;
  return {pass,
          fmt::format("control-aware schedule: |v - v_riccati| {:.2e}, max "
                      "state deviation {:.2e} after {} iterations; uniform "
                      "schedule: {:.2e} / {:.2e} after {}; {:.1f}s",
                      gap, dev, it, ugap, udev, uit, secs)};
}

Outcome separable_exactness() {
  const auto p = params(2, 2, 6, 0.1, 0.0);
  const auto prob = direct_propagation_example(p, 1, 1);
  const auto joint = direct_propagation(prob, p.K);
  const auto a = direct_propagation(restrict_to_block(prob, 0), p.K);
  const auto b = direct_propagation(restrict_to_block(prob, 1), p.K);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 3.0);
  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    Vector x(4);
    for (Eigen::Index i = 0; i < 4; ++i)
      x[i] = g(rng);
    const double whole = joint.value(0, x);
    const double parts = a.value(0, x.segment(0, 2)) + b.value(0, x.segment(2, 2));
    worst = std::max(worst, std::abs(whole - parts) / std::max(1.0, std::abs(whole)));
  }
  bool flat = true;
  for (auto r : joint.rank_trace)
    flat &= r == 1;
  const auto two = direct_propagation(direct_propagation_example(p, 2, 1), p.K);
  for (auto r : two.rank_trace)
    flat &= r == 2;
  return {worst <= kSeparableTol && flat,
          fmt::format("max relative |v - (v_1 + v_2)| at 20 states {:.2e}; "
                      "rank trace constant at r0 (r0=1 and r0=2): {}",
                      worst, flat)};
}

Outcome rank_explosion() {
  const auto p = params(2, 2, 3, 0.1, 0.0);
  const auto d = direct_propagation(direct_propagation_example(p, 2, 3), 3);
  const std::vector<std::size_t> want{2, 6, 18, 54};
  std::string got;
  for (auto r : d.rank_trace)
    got += (got.empty() ? "" : ",") + std::to_string(r);
  return {d.rank_trace == want, "pre-dedup ranks (" + got + ")"};
}

nlohmann::json reproduce_figure(const std::string &figure, const fs::path &out) {
  const auto summary = reproduce(figure, "desk", out / figure, 0);
  g_subsolution.push_back(
      {figure, json_number(summary["audit"]["subsolution_max_excess"])});
  return summary;
}

Outcome turnpike(const fs::path &out) {
  const auto t5 = std::chrono::steady_clock::now();
  const auto c5 = reproduce_figure("circle5", out);
  const double s5 = seconds_since(t5);
  const auto t10 = std::chrono::steady_clock::now();
  const auto c10 = reproduce_figure("circle10", out);
  const double s10 = seconds_since(t10);
  const double ratio = c5["dispersion_ratio"];
  const double plateau5 = c5["plateau_radius"], plateau10 = c10["plateau_radius"];
  const double final5 = c5["final_mean_radius"];
  const bool pass = ratio < kDispersionRatio && final5 < plateau5 &&
                    c5["value_monotone"].get<bool>() && plateau10 > plateau5 &&
                    s5 < 60 * kDeskMinutes && s10 < 60 * kDeskMinutes;
  return {pass,
          fmt::format("circle5: plateau {:.4f}, dispersion/plateau {:.4f}, "
                      "final mean radius {:.4f}, monotone {}, {:.1f}s; "
                      "circle10: plateau {:.4f}, {:.1f}s",
                      plateau5, ratio, final5, c5["value_monotone"].get<bool>(),
                      s5, plateau10, s10)};
}

Outcome scale_check(const fs::path &out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = reproduce_figure("large100", out);
  const double secs = seconds_since(t0);
  const bool audit_ok = s["audit"]["ok"];
  const bool monotone = s["value_monotone"];
  bool files = true;
  for (const char *f : {"value_vs_iteration.csv", "rank_vs_iteration.csv",
                        "trajectory.csv", "radii.csv", "checkpoint.json",
                        "manifest.json", "summary.json"})
    files &= fs::exists(out / "large100" / f);
  return {secs <= 60 * kLargeMinutes && audit_ok && monotone && files,
          fmt::format("N=100 K=500 M=50: {:.1f}s (limit {:.0f}s), monotone {}, "
                      "audits ok {} ({} profile checks, subsolution max excess "
                      "{:.2e}), all files {}",
                      secs, 60 * kLargeMinutes, monotone, audit_ok,
                      s["audit"]["profile_checks"].get<std::size_t>(),
                      json_number(s["audit"]["subsolution_max_excess"]), files)};
}

Outcome subsolution() {
  double worst = kMinusInfinity;
  std::string where, all;
  for (const auto &s : g_subsolution) {
    all += fmt::format("{}{} {:.2e}", all.empty() ? "" : ", ", s.run, s.max_excess);
    if (s.max_excess > worst) {
      worst = s.max_excess;
      where = s.run;
    }
  }
  return {!g_subsolution.empty() && !(worst > kSubsolutionSlack),
          fmt::format("max excess {:.2e} (slack {:.0e}) over {} runs: {}", worst,
                      kSubsolutionSlack, g_subsolution.size(), all)};
}

Outcome determinism(const fs::path &out) {
  RunConfig c;
  c.problem = params(4, 2, 100, 0.05, 1.5);
  c.initial_state.kind = InitialStateKind::annulus;
  c.seed = 1234;
  c.solver.M = 20;
  c.solver.prune_every = 5;
  c.solver.probe_uniform = 64;
  c.solver.audit_samples = 50;
  c.solver.subsolution_samples = 20;
  c.validate();
  const auto a = out / "determinism_a", b = out / "determinism_b";
  fs::remove_all(a);
  fs::remove_all(b);
  solve_bundle(c, a);
  solve_bundle(c, b);
  std::size_t same = 0, total = 0;
  std::string differing;
  for (const char *f : {"value_vs_iteration.csv", "rank_vs_iteration.csv",
                        "trajectory.csv", "radii.csv"}) {
    std::string x = read_text_file(a / f), y = read_text_file(b / f);
    if (std::string_view(f) == "value_vs_iteration.csv") {
      x = drop_csv_column(x, "wall_seconds");
      y = drop_csv_column(y, "wall_seconds");
    }
    ++total;
    if (x == y)
      ++same;
    else
      differing += std::string(" ") + f;
  }
  return {same == total && thread_count() == 1,
          fmt::format("{}/{} CSVs byte-identical (wall_seconds column masked), "
                      "threads {}{}",
                      same, total, thread_count(),
                      differing.empty() ? "" : ", differing:" + differing)};
}

} // namespace

int main(int argc, char **argv) {
  fs::path out = fs::temp_directory_path() / "troptraj_acceptance";
  std::string only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc)
      out = argv[++i];
    else if (a == "--only" && i + 1 < argc)
      only = argv[++i];
    else {
      std::cerr << "usage: troptraj_acceptance [--out DIR] [--only NAME]\n";
      return 2;
    }
  }
  set_thread_count(1);
  fs::create_directories(out);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"monotone_lower_bounds", monotone_lower_bounds},
      {"rank_bound", rank_bound},
      {"oracle_ordering", oracle_ordering},
      {"convergence_at_x0", convergence},
      {"support_validity", support_validity},
      {"separable_exactness", separable_exactness},
      {"rank_explosion", rank_explosion},
      {"turnpike", [&] { return turnpike(out); }},
      {"scale_large100", [&] { return scale_check(out); }},
      {"determinism", [&] { return determinism(out); }},
      // last: aggregates the final tables of the runs above
      {"bellman_subsolution", subsolution},
  };

  int failures = 0;
  for (const auto &[name, check] : criteria) {
    if (!only.empty() && name != only &&
        !(name == "bellman_subsolution" && !g_subsolution.empty()))
      continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
