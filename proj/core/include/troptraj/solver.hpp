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

#ifndef TROPTRAJ_SOLVER_HPP
#define TROPTRAJ_SOLVER_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "troptraj/control_model.hpp"
#include "troptraj/maxplus.hpp"

namespace troptraj {

class GridValue;

struct Trajectory {
  std::vector<Vector> states;   // K + 1
  std::vector<Vector> controls; // K
  /// sum_k h l(x_k, u_k) + phi(x_K)
  double realized_reward = kMinusInfinity;

  std::size_t steps() const { return controls.size(); }
};

/// Rolls controls forward from x0 and fills realized_reward.
Trajectory rollout(const ControlProblem &problem, const Vector &x0,
                   std::vector<Vector> controls);

double realized_reward(const ControlProblem &problem, const Trajectory &traj);

struct ZeroControl {};
struct ConstantControl {
  Vector u;
};
struct CustomTrajectory {
  Trajectory trajectory;
};
using InitMode = std::variant<ZeroControl, ConstantControl, CustomTrajectory>;

struct MinusInfinityBound {};
/// Caller-certified L <= v_k on the region of interest.
struct CertifiedConstantBound {
  double value = 0.0;
};
using BoundMode = std::variant<MinusInfinityBound, CertifiedConstantBound>;

/// fresh: the backward sweep reads tables[k + 1] including supports added
/// earlier in the same sweep. strict_previous: it reads the tables as they
/// were when the sweep started.
enum class SweepFreshness { fresh, strict_previous };

/// Where a stored support came from. Initial supports have no parent. The
/// parent is copied so audits survive pruning of the successor table.
struct SupportOrigin {
  std::uint64_t id = 0;
  std::optional<std::uint64_t> parent;
  Vector control;
  std::optional<QuadraticSupport> parent_support;
};

struct IterationRecord {
  std::size_t iteration = 0;
  double value_at_x0 = kMinusInfinity; // maximization convention
  double action_at_x0 = 0.0;           // -value_at_x0
  double realized_reward = kMinusInfinity;
  std::vector<std::size_t> ranks;      // r_k, k = 0..K
  double wall_seconds = 0.0;           // cumulative
  std::size_t supports_added = 0;
  std::size_t supports_pruned = 0;
};

struct RunHistory {
  std::vector<IterationRecord> records;
};

struct SolverState {
  Vector x0;
  std::vector<MaxPlusValueTable> tables; // v_0 .. v_K
  std::vector<std::vector<SupportOrigin>> origins;
  CurvatureSchedule schedule;
  Trajectory trajectory;
  std::size_t iteration = 0;
  std::uint64_t rng_seed = 0;
  RunHistory history;

  std::vector<std::size_t> initial_ranks;
  std::vector<std::size_t> inserts;       // per step, cumulative
  std::vector<std::optional<std::size_t>> last_inserted;
  std::uint64_t next_id = 1;

  std::size_t steps() const { return tables.empty() ? 0 : tables.size() - 1; }
  double value_at_x0() const { return tables.front().eval(x0).value; }
};

class InvariantViolation : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct SolverOptions {
  double dedup_tol = kDefaultDedupTolerance;
  SweepFreshness freshness = SweepFreshness::fresh;
  /// 0 disables pruning.
  std::size_t prune_every = 0;
  ProbeSpec probes;
  bool early_stop = false;
  double early_stop_tol = 1e-10;
  std::size_t early_stop_window = 20;
  /// Written before an InvariantViolation is thrown, when non-empty.
  std::string violation_checkpoint;
  bool verbose = false;
};

SolverState init(const ControlProblem &problem, const Vector &x0,
                 std::size_t K, const InitMode &init_mode,
                 const BoundMode &bound_mode, std::uint64_t seed = 0);

/// Per-step inner maximizers for one problem and schedule.
class SweepContext {
public:
  SweepContext(const ControlProblem &problem,
               const CurvatureSchedule &schedule);
  const InnerMaximizer &inner(std::size_t k) const { return inner_[k]; }

private:
  std::vector<InnerMaximizer> inner_;
};

struct SweepStats {
  std::size_t inserted = 0;
};

SweepStats backward_sweep(const ControlProblem &problem, SolverState &state,
                          const SolverOptions &options = {},
                          const SweepContext *context = nullptr);

void forward_pass(const ControlProblem &problem, SolverState &state,
                  const SweepContext *context = nullptr);

/// Prunes every non-terminal table against probes drawn around the current
/// reference state of each step. Protected: the most recent insert and any
/// support anchored on the reference state.
std::size_t prune_tables(const ControlProblem &problem, SolverState &state,
                         const SolverOptions &options);

/// Runs M outer iterations and appends to state.history.
const RunHistory &run(const ControlProblem &problem, SolverState &state,
                      std::size_t M, const SolverOptions &options = {});

struct SampleBox {
  Vector lower;
  Vector upper;
};

/// Bounding box of the trajectory states, widened by margin.
SampleBox trajectory_box(const Trajectory &traj, double margin);

struct AuditViolation {
  std::size_t k = 0;
  std::size_t support = 0; // index, or grid node for oracle checks
  double lhs = 0.0;
  double rhs = 0.0;
};

struct AuditReport {
  std::size_t profile_checks = 0;
  std::size_t oracle_checks = 0;
  std::vector<AuditViolation> profile_violations;
  std::vector<AuditViolation> oracle_violations;
  double max_profile_excess = kMinusInfinity;
  double max_oracle_excess = kMinusInfinity;

  bool ok() const {
    return profile_violations.empty() && oracle_violations.empty();
  }
};

/// (i) every stored support with a live parent is <= its one-step profile
/// at `count` uniform samples, at its anchor and at `local` Gaussian
/// perturbations of the anchor (std `sigma`); (ii) with an oracle,
/// tables[k] <= oracle v_k plus its tolerance at every grid node.
AuditReport support_validity_audit(const ControlProblem &problem,
                                   const SolverState &state,
                                   const SampleBox &box, std::size_t count,
                                   std::uint64_t seed,
                                   const GridValue *oracle = nullptr,
                                   std::size_t local = 4, double sigma = 0.5);

struct SubsolutionReport {
  std::size_t checks = 0;
  double max_excess = kMinusInfinity;
  std::size_t worst_k = 0;
};

/// max over samples of tables[k](x) - max_u {h l(x,u) + tables[k+1](F(x,u))}.
/// Per step: the reference state, per_step / 2 Gaussian perturbations of it
/// (std `sigma`) and the rest uniform in the box.
SubsolutionReport bellman_subsolution_check(const ControlProblem &problem,
                                            const SolverState &state,
                                            const SampleBox &box,
                                            std::size_t per_step,
                                            std::uint64_t seed,
                                            double sigma = 0.5);

inline constexpr int kCheckpointVersion = 2;

nlohmann::json to_json(const SolverState &state);
SolverState solver_state_from_json(const nlohmann::json &j);

nlohmann::json to_json(const Trajectory &traj);
Trajectory trajectory_from_json(const nlohmann::json &j);

} // namespace troptraj

#endif // TROPTRAJ_SOLVER_HPP
