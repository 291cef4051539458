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

#ifndef TROPTRAJ_NBODY_HPP
#define TROPTRAJ_NBODY_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "troptraj/control_model.hpp"

namespace troptraj {

struct Trajectory;

/**
 * Planar (or d-dimensional) swarm in a quadratic trap with softened
 * Coulomb repulsion and kinetic control cost. States are particle-major:
 * particle i occupies entries [i d, (i + 1) d).
 */
struct NBodyParams {
  std::size_t N = 5;
  std::size_t d = 2;
  double k_trap = 0.35;
  double k_T = 5.0;
  double R_diag = 0.5;
  double kappa = 1.5;
  double eps = 0.2;
  double T = 20.0;
  double h = 0.01;
  std::size_t K = 2000;

  std::size_t state_dim() const { return N * d; }
  bool operator==(const NBodyParams &) const = default;
  void validate() const;
};

double coulomb_potential(const NBodyParams &p, const Vector &x);
Vector coulomb_gradient(const NBodyParams &p, const Vector &x);
Matrix coulomb_hessian(const NBodyParams &p, const Vector &x);

struct RunningReward {
  double value = 0.0;
  Vector grad_x;
};

/// l(x, u) = -(k_trap/2 |x|^2 + W(x) + R/2 |u|^2).
RunningReward running_reward(const NBodyParams &p, const Vector &x,
                             const Vector &u);

/// phi(x) = -(k_T / 2) |x|^2 as a single support.
MaxPlusValueTable terminal_table(const NBodyParams &p);

enum class CurvatureMode { analytic, pairwise, sampled };

/// max over r of the top eigenvalue of one softened pair Hessian, times
/// eps^3 / kappa: (2t - 1) / (1 + t)^{5/2} at t = r^2 / eps^2 = 3/2.
inline constexpr double kPairCurvatureFactor = 0.20238577025077627;

struct SampledCurvature {
  std::uint64_t seed = 0;
  std::size_t count = 1000;
  double box = 10.0; // samples uniform in |x|_inf <= box
  double safety = 1.5;
};

/// Analytic: h (k_trap + 2 (N - 1) kappa / eps^3), certified.
/// Pairwise: h (k_trap + N kPairCurvatureFactor kappa / eps^3), certified.
/// Each pair Hessian is below kPairCurvatureFactor kappa / eps^3 times the
/// pair's Laplacian, and the complete-graph Laplacian has top eigenvalue N.
/// Sampled: safety * h * max spectral norm of the Hessian of -l over random
/// states, not certified.
double curvature_gamma(const NBodyParams &p, CurvatureMode mode,
                       const SampledCurvature &sampled = {});

ControlProblem make_nbody_problem(const NBodyParams &p, double gamma_h,
                                  std::string gamma_label);

struct RadiiDiagnostics {
  std::vector<double> mean_radius;
  std::vector<double> max_radius;
  double plateau_radius = 0.0;
  double plateau_dispersion = 0.0;
};

/// Plateau statistics over steps k with 0.2 K <= k <= 0.8 K.
RadiiDiagnostics radii_diagnostics(const Trajectory &traj,
                                   const NBodyParams &p);

/// Equally spaced on a circle (d >= 2, first two coordinates).
Vector circle_state(const NBodyParams &p, double radius);
/// Uniform in area on the annulus r_min <= |x_i| <= r_max.
Vector annulus_state(const NBodyParams &p, double r_min, double r_max,
                     std::uint64_t seed);

/// Rough equilibrium scale (kappa N^2 / k_trap)^(1/3).
double turnpike_scale(const NBodyParams &p);

} // namespace troptraj

#endif // TROPTRAJ_NBODY_HPP
