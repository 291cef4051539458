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


#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "troptraj/config.hpp"
#include "troptraj/experiments.hpp"
#include "troptraj/io.hpp"

using namespace troptraj;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kToml = R"(seed = 7

[problem]
N = 3
K = 40
h = 0.05

[initial_state]
kind = "circle"
radius = 2.0

[solver]
M = 4
prune_every = 0
audit_samples = 20
subsolution_samples = 10
)";

constexpr std::string_view kJson = R"({
  "seed": 7,
  "problem": {"N": 3, "K": 40, "h": 0.05},
  "initial_state": {"kind": "circle", "radius": 2.0},
  "solver": {"M": 4, "prune_every": 0, "audit_samples": 20,
             "subsolution_samples": 10}
})";

fs::path scratch(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / ("troptraj_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig parse(std::string_view text, ConfigFormat f) {
  return run_config_from_json(parse_config_text(text, f));
}

std::vector<std::string> lines(const std::string &text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    out.push_back(l);
  return out;
}

} // namespace

TEST(Config, DefaultsMatchReferenceConstants) {
  const auto c = parse("", ConfigFormat::toml);
  EXPECT_EQ(c.problem.N, 5u);
  EXPECT_EQ(c.problem.k_trap, 0.35);
  EXPECT_EQ(c.problem.k_T, 5.0);
  EXPECT_EQ(c.problem.R_diag, 0.5);
  EXPECT_EQ(c.problem.eps, 0.2);
  EXPECT_EQ(c.problem.kappa, 1.5);
  EXPECT_EQ(c.problem.h, 0.01);
  EXPECT_EQ(c.problem.K, 2000u);
  EXPECT_EQ(c.problem.T, 20.0);
  EXPECT_EQ(c.solver.M, 500u);
  EXPECT_EQ(c.solver.prune_every, 25u);
  EXPECT_EQ(c.solver.probe_sigma, 0.5);
  EXPECT_EQ(c.solver.probe_max, 4096u);
  EXPECT_EQ(c.solver.dedup_tol, 1e-9);
  EXPECT_EQ(c.initial_state.radius, 10.0);
  EXPECT_EQ(c.initial_state.r_min, 1.0);
  EXPECT_EQ(c.initial_state.r_max, 2.0);
}

TEST(Config, TomlAndJsonAgree) {
  const auto a = parse(kToml, ConfigFormat::toml);
  const auto b = parse(kJson, ConfigFormat::json);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.problem.N, 3u);
  EXPECT_NEAR(a.problem.T, 2.0, 1e-12);
}

TEST(Config, UnknownKeysAreRejectedWithPath) {
  try {
    parse("[solver]\nMM = 3\n", ConfigFormat::toml);
    FAIL();
  } catch (const ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("solver.MM"), std::string::npos);
  }
  EXPECT_THROW(parse("bogus = 1\n", ConfigFormat::toml), ConfigError);
  EXPECT_THROW(parse(R"({"problem": {"n": 3}})", ConfigFormat::json), ConfigError);
}

TEST(Config, TypeAndRangeErrors) {
  EXPECT_THROW(parse("[problem]\nN = \"five\"\n", ConfigFormat::toml), ConfigError);
  EXPECT_THROW(parse("[problem]\nN = 0\n", ConfigFormat::toml), ConfigError);
  EXPECT_THROW(parse("[problem]\nK = 10\nh = 0.1\nT = 5.0\n", ConfigFormat::toml),
               ConfigError);
  EXPECT_THROW(parse("[solver]\nM = 0\n", ConfigFormat::toml), ConfigError);
  EXPECT_THROW(parse("[initial_state]\nkind = \"square\"\n", ConfigFormat::toml),
               ConfigError);
  EXPECT_THROW(parse("[problem]\nN = 2\n[initial_state]\nkind = \"explicit\"\n"
                     "state = [1.0, 2.0]\n",
                     ConfigFormat::toml),
               ConfigError);
  EXPECT_THROW(parse("x = [", ConfigFormat::toml), ConfigError);
  EXPECT_THROW(parse("{", ConfigFormat::json), ConfigError);
}

TEST(Config, ControlAwareNeedsNothingElse) {
  const auto c = parse("[solver]\nschedule = \"control_aware\"\n"
                       "curvature = \"pairwise\"\ninit = \"lqr\"\n",
                       ConfigFormat::toml);
  EXPECT_EQ(c.solver.schedule, ScheduleKind::control_aware);
  EXPECT_EQ(c.solver.curvature, CurvatureMode::pairwise);
  EXPECT_EQ(c.solver.init, InitKind::lqr);
}

TEST(Config, OverridesApplyDottedPaths) {
  auto doc = parse_config_text(kToml, ConfigFormat::toml);
  apply_override(doc, "solver.M=9");
  apply_override(doc, "problem.kappa=0");
  apply_override(doc, "initial_state.kind=annulus");
  apply_override(doc, "outputs.trajectory=false");
  const auto c = run_config_from_json(doc);
  EXPECT_EQ(c.solver.M, 9u);
  EXPECT_EQ(c.problem.kappa, 0.0);
  EXPECT_EQ(c.initial_state.kind, InitialStateKind::annulus);
  EXPECT_FALSE(c.outputs.trajectory);
  EXPECT_THROW(apply_override(doc, "no_equals_sign"), ConfigError);
  apply_override(doc, "solver.nope=1");
  EXPECT_THROW(run_config_from_json(doc), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  auto c = parse(kToml, ConfigFormat::toml);
  c.initial_state.kind = InitialStateKind::explicit_state;
  c.initial_state.state = {1, 2, 3, 4, 5, 6};
  c.solver.bound = BoundKind::constant;
  c.solver.bound_value = -123.5;
  c.solver.freshness = SweepFreshness::strict_previous;
  const auto back = run_config_from_json(nlohmann::json::parse(to_json(c).dump()));
  EXPECT_EQ(back, c);
}

TEST(Config, FormatFromExtension) {
  EXPECT_EQ(config_format_for("a/b.json"), ConfigFormat::json);
  EXPECT_EQ(config_format_for("a/b.toml"), ConfigFormat::toml);
  EXPECT_EQ(config_format_for("cfg"), ConfigFormat::toml);
}

TEST(Config, LoadFromFileKeepsSourceAndOverrides) {
  const auto dir = scratch("load");
  {
    std::ofstream(dir / "c.toml") << kToml;
  }
  const std::vector<std::string> ov{"solver.M=2"};
  const auto lc = load_run_config(dir / "c.toml", ov);
  EXPECT_EQ(lc.source_text, std::string(kToml));
  EXPECT_EQ(lc.config.solver.M, 2u);
  EXPECT_EQ(lc.overrides, ov);
  EXPECT_THROW(load_run_config(dir / "missing.toml"), ConfigError);
}

TEST(Io, FormatNumber) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(-250.35), "-250.35");
  EXPECT_EQ(format_number(3.0), "3");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
  const double x = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_number(x)), x);
}

TEST(Io, AtomicWriteAndRead) {
  const auto dir = scratch("atomic");
  write_text_atomic(dir / "a.txt", "hello\n");
  EXPECT_EQ(read_text_file(dir / "a.txt"), "hello\n");
  write_text_atomic(dir / "a.txt", "again\n");
  EXPECT_EQ(read_text_file(dir / "a.txt"), "again\n");
  std::size_t n = 0;
  for ([[maybe_unused]] const auto &e : fs::directory_iterator(dir))
    ++n;
  EXPECT_EQ(n, 1u);
  write_json_atomic(dir / "j.json", {{"a", 1}});
  EXPECT_EQ(read_json_file(dir / "j.json")["a"], 1);
  EXPECT_THROW(read_text_file(dir / "none"), std::runtime_error);
}

TEST(Io, DropCsvColumn) {
  EXPECT_EQ(drop_csv_column("a,b,c\n1,2,3\n4,5,6\n", "b"), "a,c\n1,3\n4,6\n");
  EXPECT_EQ(drop_csv_column("a,b\n1,2\n", "b"), "a\n1\n");
  EXPECT_THROW(drop_csv_column("a,b\n1,2\n", "z"), std::invalid_argument);
}

TEST(Io, TrajectoryHeader) {
  NBodyParams p;
  p.N = 2;
  p.d = 2;
  EXPECT_EQ(trajectory_csv_header(p), "k,t,x1_1,x1_2,x2_1,x2_2,u1_norm,u2_norm");
}

TEST(Bundle, SolveWritesSchemaAndMonotoneValues) {
  const auto dir = scratch("bundle");
  auto c = parse(kToml, ConfigFormat::toml);
  c.solver.M = 10;
  const auto rep = solve_bundle(c, dir);
  for (const char *f : {"config.json", "value_vs_iteration.csv", "rank_vs_iteration.csv",
                        "trajectory.csv", "radii.csv", "checkpoint.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto v = lines(read_text_file(dir / "value_vs_iteration.csv"));
  ASSERT_EQ(v.size(), 11u);
  EXPECT_EQ(v[0], kValueCsvHeader);
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) {
    std::istringstream row(v[i]);
    std::string it, val;
    std::getline(row, it, ',');
    std::getline(row, val, ',');
    EXPECT_EQ(std::stoul(it), i);
    const double x = std::stod(val);
    EXPECT_GE(x, prev);
    prev = x;
  }
  EXPECT_EQ(lines(read_text_file(dir / "rank_vs_iteration.csv"))[0], kRankCsvHeader);
  EXPECT_EQ(lines(read_text_file(dir / "radii.csv"))[0], kRadiiCsvHeader);
  const auto traj = lines(read_text_file(dir / "trajectory.csv"));
  EXPECT_EQ(traj.size(), c.problem.K + 2);
  EXPECT_EQ(traj[0], trajectory_csv_header(c.problem));
  const auto raw = read_text_file(dir / "trajectory.csv");
  EXPECT_EQ(raw.find('\r'), std::string::npos);
  EXPECT_EQ(raw.back(), '\n');
  EXPECT_TRUE(rep.monotone);
  EXPECT_TRUE(rep.audit.ok());
}

TEST(Bundle, ManifestReconstructsConfig) {
  const auto dir = scratch("manifest");
  {
    std::ofstream(dir / "c.toml") << kToml;
  }
  const std::vector<std::string> ov{"solver.M=3", "seed=11"};
  const auto lc = load_run_config(dir / "c.toml", ov);
  const auto out = dir / "out";
  solve_bundle(lc.config, out, &lc);
  EXPECT_EQ(read_text_file(out / "config.toml"), std::string(kToml));
  const auto m = read_json_file(out / "manifest.json");
  EXPECT_EQ(m["schema_version"], kCsvSchemaVersion);
  EXPECT_EQ(m["seed"], 11);
  EXPECT_EQ(run_config_from_json(m["config"]), lc.config);
  EXPECT_EQ(run_config_from_json(read_json_file(out / "resolved_config.json")),
            lc.config);
  EXPECT_EQ(m["overrides"], nlohmann::json(ov));
  EXPECT_TRUE(m["build"].contains("troptraj_version"));
  const auto cp = solver_state_from_json(read_json_file(out / "checkpoint.json"));
  EXPECT_EQ(cp.iteration, 3u);
  EXPECT_NO_THROW(check_checkpoint_matches(build_setup(lc.config), cp));
  auto other = lc.config;
  other.problem.kappa = 1.0;
  EXPECT_THROW(check_checkpoint_matches(build_setup(other), cp), ConfigError);
}

TEST(Bundle, DeterministicCsvs) {
  auto c = parse(kToml, ConfigFormat::toml);
  c.solver.M = 6;
  c.solver.prune_every = 3;
  c.solver.probe_uniform = 10;
  const auto a = scratch("det_a"), b = scratch("det_b");
  solve_bundle(c, a);
  solve_bundle(c, b);
  for (const char *f : {"rank_vs_iteration.csv", "trajectory.csv", "radii.csv"})
    EXPECT_EQ(read_text_file(a / f), read_text_file(b / f)) << f;
  EXPECT_EQ(drop_csv_column(read_text_file(a / "value_vs_iteration.csv"), "wall_seconds"),
            drop_csv_column(read_text_file(b / "value_vs_iteration.csv"), "wall_seconds"));
  auto ca = read_json_file(a / "checkpoint.json"), cb = read_json_file(b / "checkpoint.json");
  for (auto *c : {&ca, &cb})
    for (auto &rec : (*c)["history"])
      rec.erase("wall_seconds");
  EXPECT_EQ(ca, cb);
}

TEST(Bundle, SingleParticleAtOriginHasClosedFormControls) {
  auto c = parse("[problem]\nN = 1\nK = 50\nh = 0.05\nkappa = 0.0\n"
                 "[initial_state]\nkind = \"explicit\"\nstate = [0.0, 0.0]\n"
                 "[solver]\nM = 1\nprune_every = 0\n",
                 ConfigFormat::toml);
  const auto dir = scratch("origin");
  const auto rep = solve_bundle(c, dir);
  const auto &s = rep.state;
  const double h = c.problem.h, R = c.problem.R_diag;
  for (std::size_t k = 0; k < c.problem.K; ++k) {
    const Vector &x = s.trajectory.states[k];
    const Vector &u = s.trajectory.controls[k];
    const auto &next = s.tables[k + 1];
    const Vector y = x + h * u;
    const auto &w = next[*next.eval(y).active];
    // stationarity of -h R/2 |u|^2 + w(x + h u)
    const Vector g = -h * R * u + h * grad_support(w, y);
    EXPECT_LE(g.norm(), 1e-10);
    // closed form (R + c h) u = p - c (x - a)
    const Vector closed = (w.slope - w.curvature * (x - w.anchor)) / (R + w.curvature * h);
    EXPECT_LE((u - closed).norm(), 1e-10);
  }
}

TEST(Reproduce, PresetsFollowScale) {
  const auto desk = reproduce_config("circle5", "desk");
  EXPECT_EQ(desk.problem.K, 500u);
  EXPECT_EQ(desk.problem.h, 0.04);
  EXPECT_EQ(desk.solver.M, 100u);
  EXPECT_EQ(reproduce_config("large100", "desk").solver.M, 50u);
  EXPECT_EQ(reproduce_config("large100", "desk").problem.N, 100u);
  const auto paper = reproduce_config("circle10", "paper");
  EXPECT_EQ(paper.problem.K, 2000u);
  EXPECT_EQ(paper.problem.h, 0.01);
  EXPECT_EQ(paper.solver.M, 500u);
  EXPECT_EQ(reproduce_config("annulus30", "desk").initial_state.kind,
            InitialStateKind::annulus);
  EXPECT_THROW(reproduce_config("circle7", "desk"), ConfigError);
  EXPECT_THROW(reproduce_config("circle5", "huge"), ConfigError);
}

TEST(Oracle, RiccatiReportShapes) {
  auto c = parse("[problem]\nN = 2\nK = 30\nh = 0.05\nkappa = 0.0\n", ConfigFormat::toml);
  const auto dir = scratch("oracle_riccati");
  OracleRequest req;
  req.kind = OracleKind::riccati;
  run_oracle(c, req, dir);
  const auto rows = lines(read_text_file(dir / "riccati.csv"));
  EXPECT_EQ(rows[0], kRiccatiCsvHeader);
  EXPECT_EQ(rows.size(), 31u);
  c.problem.kappa = 1.0;
  EXPECT_THROW(run_oracle(c, req, dir), std::exception);
}

TEST(Oracle, DirectTraceCsv) {
  auto c = parse("[problem]\nN = 2\nK = 3\nh = 0.05\nkappa = 0.0\n", ConfigFormat::toml);
  const auto dir = scratch("oracle_direct");
  OracleRequest req;
  req.kind = OracleKind::direct;
  const auto rep = run_oracle(c, req, dir);
  const auto rows = lines(read_text_file(dir / "rank_trace.csv"));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], kRankTraceCsvHeader);
  std::vector<std::size_t> pre;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream r(rows[i]);
    std::string a, b, cc;
    std::getline(r, a, ',');
    std::getline(r, b, ',');
    std::getline(r, cc, ',');
    pre.push_back(std::stoul(cc));
  }
  EXPECT_EQ(pre, (std::vector<std::size_t>{2, 6, 18, 54}));
}

TEST(Oracle, GridAgainstCheckpoint) {
  auto c = parse("[problem]\nN = 1\nd = 1\nK = 20\nh = 0.05\n"
                 "[initial_state]\nkind = \"explicit\"\nstate = [3.0]\n"
                 "[solver]\nM = 20\nprune_every = 0\n",
                 ConfigFormat::toml);
  const auto dir = scratch("oracle_grid");
  solve_bundle(c, dir / "run");
  OracleRequest req;
  req.kind = OracleKind::grid;
  req.checkpoint = dir / "run" / "checkpoint.json";
  req.state_nodes = 401;
  req.control_nodes = 161;
  const auto rep = run_oracle(c, req, dir / "grid");
  EXPECT_EQ(rep["clip_count"], 0);
  EXPECT_EQ(rep["comparison"]["ordering_violations"], 0);
  EXPECT_TRUE(fs::exists(dir / "grid" / "grid_values.csv"));
  EXPECT_EQ(lines(read_text_file(dir / "grid" / "grid_tolerance.csv"))[0],
            kGridToleranceCsvHeader);
}

TEST(PruneCheckpoint, KeepsValueAtX0) {
  auto c = parse(kToml, ConfigFormat::toml);
  c.solver.M = 8;
  const auto dir = scratch("prune");
  const auto rep = solve_bundle(c, dir / "run");
  const auto out = prune_checkpoint(c, dir / "run" / "checkpoint.json", dir / "pruned");
  const auto s = solver_state_from_json(read_json_file(dir / "pruned" / "checkpoint.json"));
  EXPECT_EQ(s.value_at_x0(), rep.state.value_at_x0());
  EXPECT_TRUE(fs::exists(dir / "pruned" / "prune_report.json"));
}
