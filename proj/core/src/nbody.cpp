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

#include "troptraj/nbody.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "troptraj/rng.hpp"
#include "troptraj/solver.hpp"

namespace troptraj {
namespace {

void require_state(const NBodyParams &p, const Vector &x) {
  if (static_cast<std::size_t>(x.size()) != p.state_dim())
    throw std::invalid_argument("nbody: state has wrong length");
}

} // namespace

void NBodyParams::validate() const {
  if (N == 0 || d == 0 || K == 0)
    throw std::invalid_argument("NBodyParams: N, d, K must be positive");
  if (!(R_diag > 0.0) || !(eps > 0.0) || !(T > 0.0) || !(h > 0.0))
    throw std::invalid_argument(
        "NBodyParams: R_diag, eps, T, h must be positive");
  if (!(k_trap >= 0.0) || !(k_T >= 0.0) || !(kappa >= 0.0))
    throw std::invalid_argument("NBodyParams: k_trap, k_T, kappa must be >= 0");
  if (std::abs(double(K) * h - T) > 1e-12 * T)
    throw std::invalid_argument("NBodyParams: K * h must equal T");
}

double coulomb_potential(const NBodyParams &p, const Vector &x) {
  require_state(p, x);
  const auto d = static_cast<Eigen::Index>(p.d);
  const double eps2 = p.eps * p.eps;
  double total = 0.0;
  for (std::size_t i = 0; i < p.N; ++i)
    for (std::size_t j = i + 1; j < p.N; ++j) {
      const double r2 =
          (x.segment(Eigen::Index(i) * d, d) - x.segment(Eigen::Index(j) * d, d))
              .squaredNorm();
      total += p.kappa / std::sqrt(r2 + eps2);
    }
  return total;
}

Vector coulomb_gradient(const NBodyParams &p, const Vector &x) {
  require_state(p, x);
  const auto d = static_cast<Eigen::Index>(p.d);
  const double eps2 = p.eps * p.eps;
  Vector g = Vector::Zero(x.size());
  for (std::size_t i = 0; i < p.N; ++i)
    for (std::size_t j = i + 1; j < p.N; ++j) {
      const Eigen::Index bi = Eigen::Index(i) * d;
      const Eigen::Index bj = Eigen::Index(j) * d;
      const Vector z = x.segment(bi, d) - x.segment(bj, d);
      const double s = z.squaredNorm() + eps2;
      const double coef = -p.kappa / (s * std::sqrt(s));
      g.segment(bi, d) += coef * z;
      g.segment(bj, d) -= coef * z;
    }
  return g;
}

Matrix coulomb_hessian(const NBodyParams &p, const Vector &x) {
  require_state(p, x);
  const auto d = static_cast<Eigen::Index>(p.d);
  const double eps2 = p.eps * p.eps;
  Matrix H = Matrix::Zero(x.size(), x.size());
  for (std::size_t i = 0; i < p.N; ++i)
    for (std::size_t j = i + 1; j < p.N; ++j) {
      const Eigen::Index bi = Eigen::Index(i) * d;
      const Eigen::Index bj = Eigen::Index(j) * d;
      const Vector z = x.segment(bi, d) - x.segment(bj, d);
      const double s = z.squaredNorm() + eps2;
      const double s32 = s * std::sqrt(s);
      const Matrix pair = -p.kappa / s32 * Matrix::Identity(d, d) +
                          3.0 * p.kappa / (s32 * s) * z * z.transpose();
      H.block(bi, bi, d, d) += pair;
      H.block(bj, bj, d, d) += pair;
      H.block(bi, bj, d, d) -= pair;
      H.block(bj, bi, d, d) -= pair;
    }
  return H;
}

RunningReward running_reward(const NBodyParams &p, const Vector &x,
                             const Vector &u) {
  require_state(p, x);
  if (u.size() != x.size())
    throw std::invalid_argument("running_reward: control has wrong length");
  RunningReward out;
  out.value = -(0.5 * p.k_trap * x.squaredNorm() + coulomb_potential(p, x) +
                0.5 * p.R_diag * u.squaredNorm());
  out.grad_x = -(p.k_trap * x + coulomb_gradient(p, x));
  return out;
}

MaxPlusValueTable terminal_table(const NBodyParams &p) {
  const auto n = static_cast<Eigen::Index>(p.state_dim());
  MaxPlusValueTable table(p.state_dim(), p.k_T);
  QuadraticSupport w;
  w.beta = 0.0;
  w.slope = Vector::Zero(n);
  w.anchor = Vector::Zero(n);
  w.curvature = p.k_T;
  table.insert(std::move(w));
  return table;
}

double curvature_gamma(const NBodyParams &p, CurvatureMode mode,
                       const SampledCurvature &sampled) {
  if (mode == CurvatureMode::analytic) {
    const double eps3 = p.eps * p.eps * p.eps;
    const double c_w = 2.0 * double(p.N - 1) * p.kappa / eps3;
    return p.h * (p.k_trap + c_w);
  }
  if (mode == CurvatureMode::pairwise) {
    if (p.N < 2)
      return p.h * p.k_trap;
    const double eps3 = p.eps * p.eps * p.eps;
    return p.h * (p.k_trap + double(p.N) * kPairCurvatureFactor * p.kappa / eps3);
  }
  auto rng = substream(sampled.seed, "curvature");
  std::uniform_real_distribution<double> box(-sampled.box, sampled.box);
  const auto n = static_cast<Eigen::Index>(p.state_dim());
  double worst = 0.0;
  Vector x(n);
  for (std::size_t s = 0; s < sampled.count; ++s) {
    for (Eigen::Index i = 0; i < n; ++i)
      x[i] = box(rng);
    Matrix H = coulomb_hessian(p, x);
    H.diagonal().array() += p.k_trap;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(H, Eigen::EigenvaluesOnly);
    worst = std::max(worst, eig.eigenvalues().cwiseAbs().maxCoeff());
  }
  return sampled.safety * p.h * worst;
}

ControlProblem make_nbody_problem(const NBodyParams &p, double gamma_h,
                                  std::string gamma_label) {
  p.validate();
  const std::size_t n = p.state_dim();
  ControlProblem problem;
  problem.dynamics = velocity_dynamics(n, p.h);
  problem.reward.state_reward = [p](const Vector &x) {
    StateReward r;
    r.value = -(0.5 * p.k_trap * x.squaredNorm() + coulomb_potential(p, x));
    r.gradient = -(p.k_trap * x + coulomb_gradient(p, x));
    return r;
  };
  problem.reward.control_quadratic =
      p.R_diag * Matrix::Identity(Eigen::Index(n), Eigen::Index(n));
  problem.reward.gamma_h = gamma_h;
  problem.reward.gamma_label = std::move(gamma_label);
  problem.controls = Unconstrained{};
  problem.terminal = terminal_table(p);
  problem.validate();
  return problem;
}

RadiiDiagnostics radii_diagnostics(const Trajectory &traj,
                                   const NBodyParams &p) {
  RadiiDiagnostics out;
  const auto d = static_cast<Eigen::Index>(p.d);
  for (const Vector &x : traj.states) {
    require_state(p, x);
    double sum = 0.0;
    double mx = 0.0;
    for (std::size_t i = 0; i < p.N; ++i) {
      const double r = x.segment(Eigen::Index(i) * d, d).norm();
      sum += r;
      mx = std::max(mx, r);
    }
    out.mean_radius.push_back(sum / double(p.N));
    out.max_radius.push_back(mx);
  }
  const std::size_t K = traj.states.empty() ? 0 : traj.states.size() - 1;
  const std::size_t lo = (2 * K + 9) / 10; // ceil(0.2 K)
  const std::size_t hi = (8 * K) / 10;     // floor(0.8 K)
  if (traj.states.empty() || lo > hi)
    return out;
  double mean = 0.0;
  for (std::size_t k = lo; k <= hi; ++k)
    mean += out.mean_radius[k];
  mean /= double(hi - lo + 1);
  double var = 0.0;
  for (std::size_t k = lo; k <= hi; ++k)
    var += (out.mean_radius[k] - mean) * (out.mean_radius[k] - mean);
  var /= double(hi - lo + 1);
  out.plateau_radius = mean;
  out.plateau_dispersion = std::sqrt(var);
  return out;
}

Vector circle_state(const NBodyParams &p, double radius) {
  if (p.d < 2)
    throw std::invalid_argument("circle_state: needs d >= 2");
  const auto d = static_cast<Eigen::Index>(p.d);
  Vector x = Vector::Zero(Eigen::Index(p.state_dim()));
  for (std::size_t i = 0; i < p.N; ++i) {
    const double theta = 2.0 * std::numbers::pi * double(i) / double(p.N);
    x[Eigen::Index(i) * d] = radius * std::cos(theta);
    x[Eigen::Index(i) * d + 1] = radius * std::sin(theta);
  }
  return x;
}

Vector annulus_state(const NBodyParams &p, double r_min, double r_max,
                     std::uint64_t seed) {
  if (p.d < 2)
    throw std::invalid_argument("annulus_state: needs d >= 2");
  if (!(0.0 <= r_min && r_min <= r_max))
    throw std::invalid_argument("annulus_state: need 0 <= r_min <= r_max");
  auto rng = substream(seed, "annulus");
  std::uniform_real_distribution<double> r2(r_min * r_min, r_max * r_max);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const auto d = static_cast<Eigen::Index>(p.d);
  Vector x = Vector::Zero(Eigen::Index(p.state_dim()));
  for (std::size_t i = 0; i < p.N; ++i) {
    const double r = std::sqrt(r2(rng));
    const double theta = angle(rng);
    x[Eigen::Index(i) * d] = r * std::cos(theta);
    x[Eigen::Index(i) * d + 1] = r * std::sin(theta);
  }
  return x;
}

double turnpike_scale(const NBodyParams &p) {
  return std::cbrt(p.kappa * double(p.N * p.N) / p.k_trap);
}

} // namespace troptraj
