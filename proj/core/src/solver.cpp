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

#include "troptraj/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <string>

#include "troptraj/oracles.hpp"
#include "troptraj/parallel.hpp"
#include "troptraj/rng.hpp"

namespace troptraj {
namespace {

double step_reward(const ControlProblem &problem, const Vector &x,
                   const Vector &u) {
  const double h = problem.dynamics.h;
  return h * problem.reward.state_reward(x).value +
         control_penalty(problem.reward, h, u);
}

/// One-step profile G(x) = h l(x, u) + parent(F(x, u)) for fixed u.
double one_step_profile(const ControlProblem &problem,
                        const QuadraticSupport &parent, const Vector &u,
                        const Vector &x) {
  return step_reward(problem, x, u) +
         eval_support(parent, step_dynamics(problem.dynamics, x, u));
}

Vector perturb(const Vector &center, double sigma, std::mt19937_64 &rng) {
  std::normal_distribution<double> noise(0.0, sigma);
  Vector x = center;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x[i] += noise(rng);
  return x;
}

std::vector<Vector> sample_uniform(const SampleBox &box, std::size_t count,
                                   std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Vector x(box.lower.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
      x[i] = box.lower[i] + unit(rng) * (box.upper[i] - box.lower[i]);
    out.push_back(std::move(x));
  }
  return out;
}

void dump_and_throw(const SolverState &state, const SolverOptions &options,
                    const std::string &what) {
  if (!options.violation_checkpoint.empty()) {
    std::ofstream out(options.violation_checkpoint);
    out << to_json(state).dump() << '\n';
  }
  throw InvariantViolation(what);
}

} // namespace

Trajectory rollout(const ControlProblem &problem, const Vector &x0,
                   std::vector<Vector> controls) {
  Trajectory traj;
  traj.states.reserve(controls.size() + 1);
  traj.states.push_back(x0);
  for (const auto &u : controls)
    traj.states.push_back(step_dynamics(problem.dynamics, traj.states.back(), u));
  traj.controls = std::move(controls);
  traj.realized_reward = realized_reward(problem, traj);
  return traj;
}

double realized_reward(const ControlProblem &problem, const Trajectory &traj) {
  if (traj.states.size() != traj.controls.size() + 1)
    throw std::invalid_argument("realized_reward: need K + 1 states");
  double total = 0.0;
  for (std::size_t k = 0; k < traj.controls.size(); ++k)
    total += step_reward(problem, traj.states[k], traj.controls[k]);
  return total + problem.terminal.eval(traj.states.back()).value;
}

SolverState init(const ControlProblem &problem, const Vector &x0,
                 std::size_t K, const InitMode &init_mode,
                 const BoundMode &bound_mode, std::uint64_t seed) {
  problem.validate();
  const std::size_t n = problem.state_dim();
  const auto m = static_cast<Eigen::Index>(problem.control_dim());
  if (static_cast<std::size_t>(x0.size()) != n)
    throw std::invalid_argument("init: x0 has wrong dimension");
  if (!x0.allFinite())
    throw std::invalid_argument("init: x0 must be finite");
  if (K == 0)
    throw std::invalid_argument("init: K must be >= 1");

  SolverState state;
  state.x0 = x0;
  state.rng_seed = seed;
  state.schedule = problem_schedule(problem, K);
  state.tables.reserve(K + 1);
  state.origins.resize(K + 1);
  for (std::size_t k = 0; k < K; ++k) {
    MaxPlusValueTable table(n, state.schedule[k]);
    if (const auto *c = std::get_if<CertifiedConstantBound>(&bound_mode)) {
      // beta = L with zero slope stays below L everywhere.
      QuadraticSupport w;
      w.beta = c->value;
      w.slope = Vector::Zero(Eigen::Index(n));
      w.anchor = x0;
      w.curvature = state.schedule[k];
      table.insert(std::move(w));
      state.origins[k].push_back({state.next_id++, std::nullopt, Vector(), std::nullopt});
    }
    state.tables.push_back(std::move(table));
  }
  state.tables.push_back(problem.terminal);
  for (std::size_t j = 0; j < problem.terminal.rank(); ++j)
    state.origins[K].push_back({state.next_id++, std::nullopt, Vector(), std::nullopt});

  std::vector<Vector> controls;
  if (std::holds_alternative<ZeroControl>(init_mode)) {
    controls.assign(K, Vector::Zero(m));
  } else if (const auto *c = std::get_if<ConstantControl>(&init_mode)) {
    if (c->u.size() != m)
      throw std::invalid_argument("init: constant control has wrong length");
    controls.assign(K, c->u);
  }
  if (const auto *c = std::get_if<CustomTrajectory>(&init_mode)) {
    state.trajectory = c->trajectory;
    if (state.trajectory.states.size() != K + 1 ||
        state.trajectory.controls.size() != K)
      throw std::invalid_argument("init: custom trajectory length != K");
    if (state.trajectory.states.front() != x0)
      throw std::invalid_argument("init: custom trajectory must start at x0");
    state.trajectory.realized_reward =
        realized_reward(problem, state.trajectory);
  } else {
    state.trajectory = rollout(problem, x0, std::move(controls));
  }

  for (const auto &t : state.tables)
    state.initial_ranks.push_back(t.rank());
  state.inserts.assign(K + 1, 0);
  state.last_inserted.assign(K + 1, std::nullopt);
  return state;
}

SweepContext::SweepContext(const ControlProblem &problem,
                           const CurvatureSchedule &schedule) {
  const std::size_t K = schedule.steps();
  inner_.reserve(K);
  for (std::size_t k = 0; k < K; ++k)
    inner_.emplace_back(problem.dynamics, problem.reward, problem.controls,
                        schedule[k + 1]);
}

SweepStats backward_sweep(const ControlProblem &problem, SolverState &state,
                          const SolverOptions &options,
                          const SweepContext *context) {
  std::optional<SweepContext> local;
  if (!context)
    context = &local.emplace(problem, state.schedule);
  const std::size_t K = state.steps();
  if (state.tables[K].empty())
    throw std::invalid_argument("backward_sweep: terminal table is empty");

  std::vector<MaxPlusValueTable> snapshot;
  if (options.freshness == SweepFreshness::strict_previous)
    snapshot = state.tables;
  const auto &dyn = problem.dynamics;
  const double h = dyn.h;

  SweepStats stats;
  for (std::size_t k = K; k-- > 0;) {
    const MaxPlusValueTable &next =
        snapshot.empty() ? state.tables[k + 1] : snapshot[k + 1];
    if (next.empty())
      throw std::invalid_argument("backward_sweep: successor table at step " +
                                  std::to_string(k + 1) + " is empty");
    const Vector &xref = state.trajectory.states[k];
    GreedyResult g =
        greedy_control(context->inner(k), problem.reward, next, xref);
    const QuadraticSupport &parent = next[g.active_index];
    const Vector y = step_dynamics(dyn, xref, g.control);
    Vector slope = h * problem.reward.state_reward(xref).gradient;
    if (dyn.velocity_form)
      slope += grad_support(parent, y);
    else
      slope += dyn.A.transpose() * grad_support(parent, y);

    QuadraticSupport w;
    w.beta = g.value;
    w.slope = std::move(slope);
    w.anchor = xref;
    w.curvature = state.schedule[k];

    MaxPlusValueTable &table = state.tables[k];
    if (auto dup = table.find_duplicate(w, options.dedup_tol)) {
      state.last_inserted[k] = *dup;
      continue;
    }
    table.insert(std::move(w), options.dedup_tol);
    state.origins[k].push_back({state.next_id++,
                                state.origins[k + 1][g.active_index].id,
                                std::move(g.control), parent});
    state.last_inserted[k] = table.rank() - 1;
    ++state.inserts[k];
    ++stats.inserted;
  }
  return stats;
}

void forward_pass(const ControlProblem &problem, SolverState &state,
                  const SweepContext *context) {
  std::optional<SweepContext> local;
  if (!context)
    context = &local.emplace(problem, state.schedule);
  const std::size_t K = state.steps();
  Trajectory &traj = state.trajectory;
  traj.states.assign(1, state.x0);
  traj.controls.clear();
  for (std::size_t k = 0; k < K; ++k) {
    if (state.tables[k + 1].empty())
      throw std::invalid_argument("forward_pass: table at step " +
                                  std::to_string(k + 1) + " is empty");
    GreedyResult g = greedy_control(context->inner(k), problem.reward,
                                    state.tables[k + 1], traj.states[k]);
    traj.states.push_back(
        step_dynamics(problem.dynamics, traj.states[k], g.control));
    traj.controls.push_back(std::move(g.control));
  }
  traj.realized_reward = realized_reward(problem, traj);
}

std::size_t prune_tables(const ControlProblem &problem, SolverState &state,
                         const SolverOptions &options) {
  (void)problem;
  const std::size_t K = state.steps();
  auto rng = substream(state.rng_seed,
                       "probes/" + std::to_string(state.iteration));
  std::size_t removed = 0;
  for (std::size_t k = 0; k < K; ++k) {
    MaxPlusValueTable &table = state.tables[k];
    auto &origins = state.origins[k];
    std::vector<std::size_t> keep;
    if (state.last_inserted[k])
      keep.push_back(*state.last_inserted[k]);
    const Vector &xref = state.trajectory.states[k];
    const std::vector<Vector> seeds{xref};
    for (std::size_t j = 0; j < table.rank(); ++j) {
      if (table[j].anchor == xref)
        keep.push_back(j);
    }
    if (table.empty())
      continue;
    const ProbeSet probes = make_probes(seeds, options.probes, rng);
    PruneResult pr = prune(table, probes, keep);
    removed += table.rank() - pr.kept.size();

    std::vector<SupportOrigin> kept_origins;
    std::optional<std::size_t> last;
    for (std::size_t i = 0; i < pr.kept.size(); ++i) {
      const std::size_t j = pr.kept[i];
      if (state.last_inserted[k] && *state.last_inserted[k] == j)
        last = i;
      kept_origins.push_back(std::move(origins[j]));
    }
    origins = std::move(kept_origins);
    state.last_inserted[k] = last;
    table = std::move(pr.table);
  }
  return removed;
}

const RunHistory &run(const ControlProblem &problem, SolverState &state,
                      std::size_t M, const SolverOptions &options) {
  if (M == 0)
    throw std::invalid_argument("run: M must be >= 1");
  const SweepContext context(problem, state.schedule);
  const std::size_t K = state.steps();
  const double elapsed_before =
      state.history.records.empty() ? 0.0
                                    : state.history.records.back().wall_seconds;
  const auto start = std::chrono::steady_clock::now();
  std::size_t stalled = 0;

  for (std::size_t it = 0; it < M; ++it) {
    const double before =
        state.tables[0].empty() ? kMinusInfinity : state.value_at_x0();
    const SweepStats stats = backward_sweep(problem, state, options, &context);
    forward_pass(problem, state, &context);
    ++state.iteration;

    std::size_t pruned = 0;
    if (options.prune_every > 0 && state.iteration % options.prune_every == 0)
      pruned = prune_tables(problem, state, options);

    IterationRecord rec;
    rec.iteration = state.iteration;
    rec.value_at_x0 = state.value_at_x0();
    rec.action_at_x0 = -rec.value_at_x0;
    rec.realized_reward = state.trajectory.realized_reward;
    rec.supports_added = stats.inserted;
    rec.supports_pruned = pruned;
    for (const auto &t : state.tables)
      rec.ranks.push_back(t.rank());
    rec.wall_seconds =
        elapsed_before + std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    state.history.records.push_back(rec);

    if (!(rec.value_at_x0 >= before))
      dump_and_throw(state, options,
                     "value at x0 decreased at iteration " +
                         std::to_string(state.iteration));
    for (std::size_t k = 0; k <= K; ++k)
      if (state.inserts[k] > state.iteration ||
          state.tables[k].rank() > state.initial_ranks[k] + state.iteration)
        dump_and_throw(state, options,
                       "rank bound violated at step " + std::to_string(k));
    if (options.verbose)
      std::cerr << "iteration " << rec.iteration << "  v(x0) = "
                << rec.value_at_x0 << "  max rank = "
                << *std::max_element(rec.ranks.begin(), rec.ranks.end() - 1)
                << "  t = " << rec.wall_seconds << "s\n";

    if (options.early_stop) {
      stalled = (rec.value_at_x0 - before < options.early_stop_tol) ? stalled + 1
                                                                   : 0;
      if (stalled >= options.early_stop_window)
        break;
    }
  }
  return state.history;
}

SampleBox trajectory_box(const Trajectory &traj, double margin) {
  SampleBox box;
  box.lower = traj.states.front();
  box.upper = traj.states.front();
  for (const auto &x : traj.states) {
    box.lower = box.lower.cwiseMin(x);
    box.upper = box.upper.cwiseMax(x);
  }
  box.lower.array() -= margin;
  box.upper.array() += margin;
  return box;
}

AuditReport support_validity_audit(const ControlProblem &problem,
                                   const SolverState &state,
                                   const SampleBox &box, std::size_t count,
                                   std::uint64_t seed,
                                   const GridValue *oracle, std::size_t local,
                                   double sigma) {
  AuditReport report;
  const std::size_t K = state.steps();
  auto rng = substream(seed, "audit");
  const std::vector<Vector> samples = sample_uniform(box, count, rng);

  // A control-aware schedule only certifies w <= max_u of the profile.
  const bool maximize = problem.schedule == ScheduleKind::control_aware;

  std::vector<AuditReport> per_step(K);
  parallel_for(K, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t k = begin; k < end; ++k) {
      AuditReport &r = per_step[k];
      const MaxPlusValueTable &table = state.tables[k];
      for (std::size_t j = 0; j < table.rank(); ++j) {
        const SupportOrigin &o = state.origins[k][j];
        if (!o.parent_support)
          continue;
        const QuadraticSupport &parent = *o.parent_support;
        auto local_rng = substream(seed, "audit/" + std::to_string(k) + "/" +
                                             std::to_string(o.id));
        std::vector<Vector> points = samples;
        points.push_back(table[j].anchor);
        for (std::size_t s = 0; s < local; ++s)
          points.push_back(perturb(table[j].anchor, sigma, local_rng));
        for (const Vector &x : points) {
          const double lhs = eval_support(table[j], x);
          const double rhs =
              maximize ? inner_argmax(problem.dynamics, problem.reward, parent,
                                      problem.controls, x)
                             .value
                       : one_step_profile(problem, parent, o.control, x);
          ++r.profile_checks;
          const double excess = lhs - rhs;
          r.max_profile_excess = std::max(r.max_profile_excess, excess);
          if (excess > 1e-9 * (1.0 + std::abs(rhs)))
            r.profile_violations.push_back({k, j, lhs, rhs});
        }
      }
    }
  });
  for (auto &r : per_step) {
    report.profile_checks += r.profile_checks;
    report.max_profile_excess =
        std::max(report.max_profile_excess, r.max_profile_excess);
    report.profile_violations.insert(report.profile_violations.end(),
                                     r.profile_violations.begin(),
                                     r.profile_violations.end());
  }

  if (oracle) {
    if (oracle->steps() != K)
      throw std::invalid_argument("audit: oracle horizon differs");
    for (std::size_t k = 0; k <= K; ++k) {
      if (state.tables[k].empty())
        continue;
      for (std::size_t node = 0; node < oracle->node_count(); ++node) {
        const double lhs = state.tables[k].eval(oracle->node(node)).value;
        const double rhs = oracle->values[k][node] + oracle->tolerance[k];
        ++report.oracle_checks;
        report.max_oracle_excess =
            std::max(report.max_oracle_excess, lhs - oracle->values[k][node]);
        if (lhs > rhs)
          report.oracle_violations.push_back({k, node, lhs, rhs});
      }
    }
  }
  return report;
}

SubsolutionReport bellman_subsolution_check(const ControlProblem &problem,
                                            const SolverState &state,
                                            const SampleBox &box,
                                            std::size_t per_step,
                                            std::uint64_t seed, double sigma) {
  const std::size_t K = state.steps();
  const SweepContext context(problem, state.schedule);
  auto rng = substream(seed, "subsolution");
  std::vector<std::vector<Vector>> samples(K);
  for (std::size_t k = 0; k < K; ++k) {
    const Vector &ref = state.trajectory.states[k];
    if (per_step == 0)
      continue;
    const std::size_t near = per_step / 2;
    samples[k] = sample_uniform(box, per_step - 1 - near, rng);
    samples[k].push_back(ref);
    for (std::size_t s = 0; s < near; ++s)
      samples[k].push_back(perturb(ref, sigma, rng));
  }
  std::vector<double> worst(K, kMinusInfinity);
  parallel_for(K, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t k = begin; k < end; ++k) {
      if (state.tables[k].empty())
        continue;
      for (const Vector &x : samples[k]) {
        const double lhs = state.tables[k].eval(x).value;
        const double rhs = greedy_control(context.inner(k), problem.reward,
                                          state.tables[k + 1], x)
                               .value;
        worst[k] = std::max(worst[k], lhs - rhs);
      }
    }
  });
  SubsolutionReport report;
  for (std::size_t k = 0; k < K; ++k) {
    if (!state.tables[k].empty())
      report.checks += samples[k].size();
    if (worst[k] > report.max_excess) {
      report.max_excess = worst[k];
      report.worst_k = k;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

nlohmann::json number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_or_minus_inf(const nlohmann::json &j) {
  return j.is_null() ? kMinusInfinity : j.get<double>();
}

} // namespace

nlohmann::json to_json(const Trajectory &traj) {
  nlohmann::json states = nlohmann::json::array();
  for (const auto &x : traj.states)
    states.push_back(vector_to_json(x));
  nlohmann::json controls = nlohmann::json::array();
  for (const auto &u : traj.controls)
    controls.push_back(vector_to_json(u));
  return {{"states", std::move(states)},
          {"controls", std::move(controls)},
          {"realized_reward", number(traj.realized_reward)}};
}

Trajectory trajectory_from_json(const nlohmann::json &j) {
  Trajectory traj;
  for (const auto &x : j.at("states"))
    traj.states.push_back(vector_from_json(x));
  for (const auto &u : j.at("controls"))
    traj.controls.push_back(vector_from_json(u));
  traj.realized_reward = number_or_minus_inf(j.at("realized_reward"));
  return traj;
}

nlohmann::json to_json(const SolverState &state) {
  nlohmann::json tables = nlohmann::json::array();
  for (const auto &t : state.tables)
    tables.push_back(to_json(t));
  nlohmann::json origins = nlohmann::json::array();
  for (const auto &step : state.origins) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto &o : step)
      row.push_back({{"id", o.id},
                     {"parent", o.parent ? nlohmann::json(*o.parent)
                                         : nlohmann::json(nullptr)},
                     {"control", vector_to_json(o.control)},
                     {"parent_support", o.parent_support
                                            ? support_to_json(*o.parent_support)
                                            : nlohmann::json(nullptr)}});
    origins.push_back(std::move(row));
  }
  nlohmann::json last = nlohmann::json::array();
  for (const auto &l : state.last_inserted)
    last.push_back(l ? nlohmann::json(*l) : nlohmann::json(nullptr));
  nlohmann::json history = nlohmann::json::array();
  for (const auto &r : state.history.records)
    history.push_back({{"iteration", r.iteration},
                       {"value_at_x0", number(r.value_at_x0)},
                       {"realized_reward", number(r.realized_reward)},
                       {"ranks", r.ranks},
                       {"wall_seconds", r.wall_seconds},
                       {"supports_added", r.supports_added},
                       {"supports_pruned", r.supports_pruned}});
  return {{"format", "troptraj-checkpoint"},
          {"version", kCheckpointVersion},
          {"iteration", state.iteration},
          {"rng_seed", state.rng_seed},
          {"x0", vector_to_json(state.x0)},
          {"schedule", state.schedule.c},
          {"trajectory", to_json(state.trajectory)},
          {"tables", std::move(tables)},
          {"origins", std::move(origins)},
          {"initial_ranks", state.initial_ranks},
          {"inserts", state.inserts},
          {"last_inserted", std::move(last)},
          {"next_id", state.next_id},
          {"history", std::move(history)}};
}

SolverState solver_state_from_json(const nlohmann::json &j) {
  if (j.value("format", "") != "troptraj-checkpoint")
    throw std::invalid_argument("not a troptraj checkpoint");
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw std::invalid_argument("unsupported checkpoint version " +
                                j.at("version").dump());
  SolverState s;
  s.iteration = j.at("iteration").get<std::size_t>();
  s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  s.x0 = vector_from_json(j.at("x0"));
  s.schedule.c = j.at("schedule").get<std::vector<double>>();
  s.trajectory = trajectory_from_json(j.at("trajectory"));
  for (const auto &t : j.at("tables"))
    s.tables.push_back(table_from_json(t));
  for (const auto &row : j.at("origins")) {
    std::vector<SupportOrigin> step;
    for (const auto &o : row) {
      SupportOrigin origin;
      origin.id = o.at("id").get<std::uint64_t>();
      if (!o.at("parent").is_null())
        origin.parent = o.at("parent").get<std::uint64_t>();
      origin.control = vector_from_json(o.at("control"));
      if (!o.at("parent_support").is_null())
        origin.parent_support = support_from_json(o.at("parent_support"));
      step.push_back(std::move(origin));
    }
    s.origins.push_back(std::move(step));
  }
  s.initial_ranks = j.at("initial_ranks").get<std::vector<std::size_t>>();
  s.inserts = j.at("inserts").get<std::vector<std::size_t>>();
  for (const auto &l : j.at("last_inserted"))
    s.last_inserted.push_back(l.is_null() ? std::nullopt
                                          : std::optional(l.get<std::size_t>()));
  s.next_id = j.at("next_id").get<std::uint64_t>();
  for (const auto &r : j.at("history")) {
    IterationRecord rec;
    rec.iteration = r.at("iteration").get<std::size_t>();
    rec.value_at_x0 = number_or_minus_inf(r.at("value_at_x0"));
    rec.action_at_x0 = -rec.value_at_x0;
    rec.realized_reward = number_or_minus_inf(r.at("realized_reward"));
    rec.ranks = r.at("ranks").get<std::vector<std::size_t>>();
    rec.wall_seconds = r.at("wall_seconds").get<double>();
    rec.supports_added = r.at("supports_added").get<std::size_t>();
    rec.supports_pruned = r.at("supports_pruned").get<std::size_t>();
    s.history.records.push_back(std::move(rec));
  }
  const std::size_t K = s.steps();
  if (s.schedule.c.size() != K + 1 || s.origins.size() != K + 1 ||
      s.inserts.size() != K + 1 || s.last_inserted.size() != K + 1 ||
      s.initial_ranks.size() != K + 1)
    throw std::invalid_argument("checkpoint: inconsistent horizon");
  for (std::size_t k = 0; k <= K; ++k) {
    if (s.tables[k].curvature() != s.schedule[k])
      throw std::invalid_argument("checkpoint: table curvature != schedule");
    if (s.origins[k].size() != s.tables[k].rank())
      throw std::invalid_argument("checkpoint: origins/table size differ");
  }
  return s;
}

} // namespace troptraj
