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

#ifndef TROPTRAJ_CONTROL_MODEL_HPP
#define TROPTRAJ_CONTROL_MODEL_HPP

#include <cstddef>
#include <functional>
#include <string>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>

#include "troptraj/maxplus.hpp"

namespace troptraj {

/// One-step map F(x, u) = A x + B u + b.
struct AffineDynamics {
  Matrix A;
  Matrix B;
  Vector b;
  double h = 0.0;
  /// Upper bound on the spectral norm of A.
  double opnorm_A = 0.0;
  /// A = I, b = 0 and B = h I; enables the isotropic fast path.
  bool velocity_form = false;

  std::size_t state_dim() const { return static_cast<std::size_t>(A.rows()); }
  std::size_t control_dim() const {
    return static_cast<std::size_t>(B.cols());
  }
  void validate() const;
};

/// Builds dynamics and certifies opnorm_A. When no bound is given it is
/// the largest singular value inflated by a relative 1e-10.
AffineDynamics make_affine_dynamics(Matrix A, Matrix B, Vector b, double h,
                                    std::optional<double> opnorm_bound = {});

/// x+ = x + h u on R^n.
AffineDynamics velocity_dynamics(std::size_t n, double h);

/// Certified upper bound on the spectral norm.
double spectral_norm_bound(const Matrix &A);

Vector step_dynamics(const AffineDynamics &dyn, const Vector &x,
                     const Vector &u);

struct Unconstrained {};
struct BoxControls {
  Vector lower;
  Vector upper;
};
using ControlSet = std::variant<Unconstrained, BoxControls>;

void validate_controls(const ControlSet &ctrl, std::size_t control_dim);

struct StateReward {
  double value = 0.0;
  Vector gradient;
};

/// Running reward h l(x, u) = h rho(x) - (h/2) u' Q_u u.
struct RewardModel {
  std::function<StateReward(const Vector &)> state_reward;
  Matrix control_quadratic;
  /// Semiconvexity constant of x -> h l(x, u), uniform in u.
  double gamma_h = 0.0;
  /// Human-readable origin of gamma_h ("analytic", "sampled (uncertified)").
  std::string gamma_label = "user";

  void validate(std::size_t control_dim) const;
};

/// The control part of h l(x, u): -(h/2) u' Q_u u.
double control_penalty(const RewardModel &reward, double h, const Vector &u);

struct CurvatureSchedule {
  std::vector<double> c;

  std::size_t steps() const { return c.empty() ? 0 : c.size() - 1; }
  double operator[](std::size_t k) const { return c[k]; }
};

/// c_K given, c_k = gamma_h + opnorm_A^2 c_{k+1}.
CurvatureSchedule curvature_schedule(double gamma_h, double c_terminal,
                                     double opnorm_A, std::size_t K);

/// Which recursion init() uses to build the curvature schedule.
enum class ScheduleKind {
  /// c_k = gamma_h + |A|^2 c_{k+1}; valid for any control set.
  uniform,
  /// c_k = gamma_h + image_curvature(c_{k+1}); unconstrained controls only.
  control_aware,
};

/// Largest eigenvalue of A'(cI - c^2 P)A with P = B (hQ + c B'B)^{-1} B'.
/// For unconstrained controls, maximizing -(h/2)u'Qu + w(Ax + Bu + b) over u
/// for a support w of curvature c gives a concave quadratic in x whose
/// curvature is bounded by this value (c q / (q + c h) for velocity form).
double image_curvature(const AffineDynamics &dyn, const Matrix &Q, double c);

struct ControlProblem {
  AffineDynamics dynamics;
  RewardModel reward;
  ControlSet controls = Unconstrained{};
  /// Exact terminal reward phi as a max-plus table.
  MaxPlusValueTable terminal;
  ScheduleKind schedule = ScheduleKind::uniform;

  std::size_t state_dim() const { return dynamics.state_dim(); }
  std::size_t control_dim() const { return dynamics.control_dim(); }
  void validate() const;
};

/// Schedule of length K + 1 from problem.schedule, c_K = terminal curvature.
CurvatureSchedule problem_schedule(const ControlProblem &problem,
                                   std::size_t K);

struct InnerResult {
  Vector control;
  double value = kMinusInfinity;
};

struct GreedyResult {
  Vector control;
  double value = kMinusInfinity;
  std::size_t active_index = 0;
};

/**
 * Solves the per-support inner problem
 *
 *   max_u  h l(x, u) + w(F(x, u)).
 *
 * The Hessian in u is -(h Q_u + c B'B) and depends only on the
 * curvature c of w, so one factorization serves a whole table.
 */
class InnerMaximizer {
public:
  InnerMaximizer(const AffineDynamics &dyn, const RewardModel &reward,
                 const ControlSet &ctrl, double curvature);

  double curvature() const { return curvature_; }
  const AffineDynamics *dynamics() const { return dyn_; }

  /// `h_rho` is h rho(x), `drift` is A x + b. Both are shared across all
  /// supports of a table.
  InnerResult solve(const QuadraticSupport &w, double h_rho,
                    const Vector &drift) const;

private:
  Vector solve_box(const Vector &rhs, const BoxControls &box) const;

  const AffineDynamics *dyn_;
  const RewardModel *reward_;
  const ControlSet *ctrl_;
  double curvature_;
  Matrix hessian_; // h Q_u + c B'B
  Eigen::LLT<Matrix> llt_;
  std::optional<double> isotropic_; // hessian_ = s I with B = h I
};

InnerResult inner_argmax(const AffineDynamics &dyn, const RewardModel &reward,
                         const QuadraticSupport &w_next, const ControlSet &ctrl,
                         const Vector &x);

/// Greedy control against a whole table; lowest index wins ties.
GreedyResult greedy_control(const AffineDynamics &dyn,
                            const RewardModel &reward,
                            const MaxPlusValueTable &next,
                            const ControlSet &ctrl, const Vector &x);

/// Same as greedy_control with a prebuilt maximizer for next's curvature.
GreedyResult greedy_control(const InnerMaximizer &inner,
                            const RewardModel &reward,
                            const MaxPlusValueTable &next, const Vector &x);

} // namespace troptraj

#endif // TROPTRAJ_CONTROL_MODEL_HPP
