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

#include "troptraj/control_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

namespace troptraj {
namespace {

std::optional<double> scalar_identity(const Matrix &M) {
  if (M.rows() != M.cols() || M.rows() == 0)
    return std::nullopt;
  const double s = M(0, 0);
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      if (M(i, j) != (i == j ? s : 0.0))
        return std::nullopt;
  return s;
}

} // namespace

void AffineDynamics::validate() const {
  const auto n = A.rows();
  if (n == 0 || A.cols() != n)
    throw std::invalid_argument("AffineDynamics: A must be square, n >= 1");
  if (B.rows() != n || B.cols() == 0)
    throw std::invalid_argument("AffineDynamics: B must be n x m, m >= 1");
  if (b.size() != n)
    throw std::invalid_argument("AffineDynamics: b must have length n");
  if (!(h > 0.0))
    throw std::invalid_argument("AffineDynamics: h must be > 0");
  if (!A.allFinite() || !B.allFinite() || !b.allFinite())
    throw std::invalid_argument("AffineDynamics: non-finite entry");
  if (!(opnorm_A >= 0.0))
    throw std::invalid_argument("AffineDynamics: opnorm_A must be >= 0");
}

double spectral_norm_bound(const Matrix &A) {
  if (A.size() == 0)
    return 0.0;
  Eigen::JacobiSVD<Matrix> svd(A);
  const double sigma = svd.singularValues()(0);
  return sigma * (1.0 + 1e-10) + 1e-300;
}

AffineDynamics make_affine_dynamics(Matrix A, Matrix B, Vector b, double h,
                                    std::optional<double> opnorm_bound) {
  AffineDynamics dyn;
  dyn.A = std::move(A);
  dyn.B = std::move(B);
  dyn.b = std::move(b);
  dyn.h = h;
  dyn.opnorm_A = 0.0;
  dyn.validate();
  if (opnorm_bound) {
    if (!(*opnorm_bound >= 0.0))
      throw std::invalid_argument("make_affine_dynamics: negative opnorm");
    dyn.opnorm_A = *opnorm_bound;
  } else {
    dyn.opnorm_A = spectral_norm_bound(dyn.A);
  }
  const auto a = scalar_identity(dyn.A);
  const auto bb = scalar_identity(dyn.B);
  dyn.velocity_form = a && *a == 1.0 && bb && *bb == h && dyn.b.isZero(0.0);
  if (dyn.velocity_form)
    dyn.opnorm_A = std::max(dyn.opnorm_A, 1.0);
  return dyn;
}

AffineDynamics velocity_dynamics(std::size_t n, double h) {
  const auto m = static_cast<Eigen::Index>(n);
  return make_affine_dynamics(Matrix::Identity(m, m), h * Matrix::Identity(m, m),
                              Vector::Zero(m), h, 1.0);
}

Vector step_dynamics(const AffineDynamics &dyn, const Vector &x,
                     const Vector &u) {
  if (x.size() != dyn.A.cols() || u.size() != dyn.B.cols())
    throw std::invalid_argument("step_dynamics: dimension mismatch");
  if (dyn.velocity_form)
    return x + dyn.h * u;
  return dyn.A * x + dyn.B * u + dyn.b;
}

void validate_controls(const ControlSet &ctrl, std::size_t control_dim) {
  if (const auto *box = std::get_if<BoxControls>(&ctrl)) {
    const auto m = static_cast<Eigen::Index>(control_dim);
    if (box->lower.size() != m || box->upper.size() != m)
      throw std::invalid_argument("BoxControls: bounds must have length m");
    if (!box->lower.allFinite() || !box->upper.allFinite())
      throw std::invalid_argument("BoxControls: bounds must be finite");
    if ((box->lower.array() > box->upper.array()).any())
      throw std::invalid_argument("BoxControls: lower > upper");
  }
}

void RewardModel::validate(std::size_t control_dim) const {
  if (!state_reward)
    throw std::invalid_argument("RewardModel: state_reward not set");
  const auto m = static_cast<Eigen::Index>(control_dim);
  if (control_quadratic.rows() != m || control_quadratic.cols() != m)
    throw std::invalid_argument("RewardModel: Q_u must be m x m");
  if ((control_quadratic - control_quadratic.transpose()).cwiseAbs().maxCoeff() !=
      0.0)
    throw std::invalid_argument("RewardModel: Q_u must be symmetric");
  Eigen::LLT<Matrix> llt(control_quadratic);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("RewardModel: Q_u must be positive definite");
  if (!(gamma_h >= 0.0) || !std::isfinite(gamma_h))
    throw std::invalid_argument("RewardModel: gamma_h must be >= 0");
}

double control_penalty(const RewardModel &reward, double h, const Vector &u) {
  return -0.5 * h * u.dot(reward.control_quadratic * u);
}

CurvatureSchedule curvature_schedule(double gamma_h, double c_terminal,
                                     double opnorm_A, std::size_t K) {
  if (!(gamma_h >= 0.0) || !(c_terminal >= 0.0) || !(opnorm_A >= 0.0))
    throw std::invalid_argument("curvature_schedule: inputs must be >= 0");
  CurvatureSchedule s;
  s.c.assign(K + 1, 0.0);
  s.c[K] = c_terminal;
  const double a2 = opnorm_A * opnorm_A;
  for (std::size_t k = K; k-- > 0;)
    s.c[k] = gamma_h + a2 * s.c[k + 1];
  return s;
}

double image_curvature(const AffineDynamics &dyn, const Matrix &Q, double c) {
  if (!(c >= 0.0))
    throw std::invalid_argument("image_curvature: curvature must be >= 0");
  if (c == 0.0)
    return 0.0;
  const bool isotropic =
      Q.rows() == 1 ||
      (Q - Q(0, 0) * Matrix::Identity(Q.rows(), Q.cols())).cwiseAbs().maxCoeff() == 0.0;
  if (dyn.velocity_form && isotropic)
    return c * Q(0, 0) / (Q(0, 0) + c * dyn.h);
  const Matrix M = dyn.h * Q + c * dyn.B.transpose() * dyn.B;
  const Matrix P = dyn.B * M.llt().solve(dyn.B.transpose());
  const auto n = dyn.A.rows();
  Matrix S = dyn.A.transpose() *
             (c * Matrix::Identity(n, n) - c * c * P) * dyn.A;
  S = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(S, Eigen::EigenvaluesOnly);
  // Upper-round like the operator norm.
  return std::max(0.0, eig.eigenvalues().maxCoeff()) * (1.0 + 1e-10);
}

CurvatureSchedule problem_schedule(const ControlProblem &problem,
                                   std::size_t K) {
  const double cK = problem.terminal.curvature();
  const double gamma = problem.reward.gamma_h;
  if (problem.schedule == ScheduleKind::uniform)
    return curvature_schedule(gamma, cK, problem.dynamics.opnorm_A, K);
  if (!std::holds_alternative<Unconstrained>(problem.controls))
    throw std::invalid_argument(
        "control_aware schedule requires unconstrained controls");
  if (!(gamma >= 0.0) || !(cK >= 0.0))
    throw std::invalid_argument("problem_schedule: inputs must be >= 0");
  CurvatureSchedule s;
  s.c.assign(K + 1, 0.0);
  s.c[K] = cK;
  for (std::size_t k = K; k-- > 0;)
    s.c[k] = gamma + image_curvature(problem.dynamics,
                                     problem.reward.control_quadratic,
                                     s.c[k + 1]);
  return s;
}

void ControlProblem::validate() const {
  dynamics.validate();
  reward.validate(control_dim());
  validate_controls(controls, control_dim());
  if (terminal.dim() != state_dim())
    throw std::invalid_argument("ControlProblem: terminal table dimension");
  if (terminal.empty())
    throw std::invalid_argument("ControlProblem: terminal table is empty");
}

InnerMaximizer::InnerMaximizer(const AffineDynamics &dyn,
                               const RewardModel &reward,
                               const ControlSet &ctrl, double curvature)
    : dyn_(&dyn), reward_(&reward), ctrl_(&ctrl), curvature_(curvature) {
  if (!(curvature >= 0.0))
    throw std::invalid_argument("InnerMaximizer: curvature must be >= 0");
  hessian_ = dyn.h * reward.control_quadratic +
             curvature * (dyn.B.transpose() * dyn.B);
  const auto q = scalar_identity(reward.control_quadratic);
  if (dyn.velocity_form && q) {
    // h q + c h^2 = h (q + c h); the common factor h cancels against B' = h I.
    isotropic_ = *q + curvature * dyn.h;
  } else {
    llt_.compute(hessian_);
    if (llt_.info() != Eigen::Success)
      throw std::runtime_error("InnerMaximizer: singular control Hessian");
  }
}

Vector InnerMaximizer::solve_box(const Vector &rhs,
                                 const BoxControls &box) const {
  // Exact coordinate ascent on a strongly concave quadratic over a box.
  Vector u = isotropic_ ? Vector(rhs / (*isotropic_ * dyn_->h))
                        : Vector(llt_.solve(rhs));
  u = u.cwiseMax(box.lower).cwiseMin(box.upper);
  const auto m = u.size();
  for (int sweep = 0; sweep < 10000; ++sweep) {
    double change = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double off = hessian_.row(i).dot(u) - hessian_(i, i) * u[i];
      const double ui = std::clamp((rhs[i] - off) / hessian_(i, i),
                                   box.lower[i], box.upper[i]);
      change = std::max(change, std::abs(ui - u[i]));
      u[i] = ui;
    }
    if (change <= 1e-15 * (1.0 + u.lpNorm<Eigen::Infinity>()))
      break;
  }
  return u;
}

InnerResult InnerMaximizer::solve(const QuadraticSupport &w, double h_rho,
                                  const Vector &drift) const {
  if (!(std::isfinite(h_rho) && drift.allFinite()))
    throw std::invalid_argument("inner_argmax: non-finite input");
  if (w.dim() != static_cast<std::size_t>(drift.size()))
    throw std::invalid_argument("inner_argmax: dimension mismatch");
  if (w.curvature != curvature_)
    throw std::invalid_argument("inner_argmax: curvature mismatch");
  const double h = dyn_->h;
  // Stationarity: (h Q_u + c B'B) u = B' (p - c (A x + b - a)).
  Vector residual = w.slope - curvature_ * (drift - w.anchor);
  InnerResult out;
  const auto *box = std::get_if<BoxControls>(ctrl_);
  if (isotropic_) {
    if (box)
      out.control = solve_box(h * residual, *box);
    else
      out.control = residual / *isotropic_;
    const Vector next = drift + h * out.control;
    out.value = h_rho - 0.5 * h * reward_->control_quadratic(0, 0) *
                            out.control.squaredNorm() +
                eval_support(w, next);
    return out;
  }
  const Vector rhs = dyn_->B.transpose() * residual;
  out.control = box ? solve_box(rhs, *box) : Vector(llt_.solve(rhs));
  const Vector next = drift + dyn_->B * out.control;
  out.value = h_rho + control_penalty(*reward_, h, out.control) +
              eval_support(w, next);
  return out;
}

namespace {

Vector drift_of(const AffineDynamics &dyn, const Vector &x) {
  if (x.size() != dyn.A.cols())
    throw std::invalid_argument("greedy_control: dimension mismatch");
  if (dyn.velocity_form)
    return x;
  return dyn.A * x + dyn.b;
}

double h_rho_of(const RewardModel &reward, double h, const Vector &x) {
  return h * reward.state_reward(x).value;
}

} // namespace

InnerResult inner_argmax(const AffineDynamics &dyn, const RewardModel &reward,
                         const QuadraticSupport &w_next, const ControlSet &ctrl,
                         const Vector &x) {
  const InnerMaximizer inner(dyn, reward, ctrl, w_next.curvature);
  return inner.solve(w_next, h_rho_of(reward, dyn.h, x), drift_of(dyn, x));
}

GreedyResult greedy_control(const InnerMaximizer &inner,
                            const RewardModel &reward,
                            const MaxPlusValueTable &next, const Vector &x) {
  if (next.empty())
    throw std::invalid_argument("greedy_control: empty successor table");
  const AffineDynamics &dyn = *inner.dynamics();
  const double h_rho = h_rho_of(reward, dyn.h, x);
  const Vector drift = drift_of(dyn, x);
  GreedyResult best;
  for (std::size_t j = 0; j < next.rank(); ++j) {
    InnerResult r = inner.solve(next[j], h_rho, drift);
    if (j == 0 || r.value > best.value) {
      best.value = r.value;
      best.control = std::move(r.control);
      best.active_index = j;
    }
  }
  return best;
}

GreedyResult greedy_control(const AffineDynamics &dyn,
                            const RewardModel &reward,
                            const MaxPlusValueTable &next,
                            const ControlSet &ctrl, const Vector &x) {
  const InnerMaximizer inner(dyn, reward, ctrl, next.curvature());
  return greedy_control(inner, reward, next, x);
}

} // namespace troptraj
