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

#ifndef TROPTRAJ_ORACLES_HPP
#define TROPTRAJ_ORACLES_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "troptraj/control_model.hpp"
#include "troptraj/nbody.hpp"
#include "troptraj/solver.hpp"

namespace troptraj {

// ---------------------------------------------------------------------------
// Riccati baseline for the interaction-free swarm.

/// v_k(x) = s_k |x|^2 / 2 and u_k = gain_k x_k.
struct RiccatiSolution {
  std::vector<double> s;    // K + 1
  std::vector<double> gain; // K
  double h = 0.0;

  double value(std::size_t k, const Vector &x) const;
  /// Max over k of |s_k - (-h k_trap + s_{k+1} R / (R - h s_{k+1}))|.
  double residual(const NBodyParams &p) const;
  Trajectory rollout(const ControlProblem &problem, const Vector &x0) const;
};

/// Requires kappa == 0.
RiccatiSolution riccati_solve(const NBodyParams &p);

// ---------------------------------------------------------------------------
// Grid value iteration, n <= 3.

struct GridAxis {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t nodes = 2;

  double step() const { return (upper - lower) / double(nodes - 1); }
  double node(std::size_t i) const { return lower + double(i) * step(); }
};

/// What happens when a grid control sends a node outside the state box.
enum class BoundaryRule {
  reject,  // throw GridBoxError naming the (x, u)
  clip,    // project the successor onto the box
  exclude, // the control is inadmissible at that node
};

class GridBoxError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct GridOptions {
  std::vector<GridAxis> state_axes;
  std::vector<GridAxis> control_axes;
  BoundaryRule boundary = BoundaryRule::exclude;
  /// Multiplies the per-step interpolation and control-grid error estimate.
  double tolerance_safety = 2.0;
};

class GridValue {
public:
  std::vector<GridAxis> state_axes;
  std::vector<GridAxis> control_axes;
  std::vector<std::vector<double>> values; // [k][flat node]
  /// Estimated bound on v_k - grid v_k, accumulated from the terminal step.
  std::vector<double> tolerance;
  std::size_t clip_count = 0;
  std::size_t excluded_count = 0;
  /// Nodes whose best control touched an excluded control or the edge of
  /// the control grid (the restriction may be active there).
  std::size_t binding_count = 0;

  std::size_t node_count() const;
  Vector node(std::size_t flat) const;
  /// Multilinear interpolation; x is clamped to the box.
  double value(std::size_t k, const Vector &x) const;
  std::size_t steps() const { return values.empty() ? 0 : values.size() - 1; }
};

GridValue grid_value_iteration(const ControlProblem &problem, std::size_t K,
                               const GridOptions &options);

// ---------------------------------------------------------------------------
// Direct max-plus propagation of general quadratics.

/// q(x) = constant + linear . x + x' hessian x / 2
struct QuadraticForm {
  double constant = 0.0;
  Vector linear;
  Matrix hessian;

  double eval(const Vector &x) const;
  QuadraticForm operator+(const QuadraticForm &o) const;
  QuadraticForm scaled(double s) const;
  /// True when the Hessian has no coupling between distinct blocks.
  bool block_separable(std::size_t block_dim, double tol = 0.0) const;

  static QuadraticForm zero(std::size_t n);
  /// -(stiffness / 2) |x - center|^2
  static QuadraticForm well(const Vector &center, double stiffness);
};

struct SeparableQuadraticProblem {
  AffineDynamics dynamics;
  Matrix control_quadratic;
  /// Local state reward rho_loc per unit time (so h rho_loc enters).
  QuadraticForm local_reward;
  /// -W = max_r interaction[r], per unit time. Empty means W = 0.
  std::vector<QuadraticForm> interaction;
  /// phi = max_j terminal[j].
  std::vector<QuadraticForm> terminal;
  std::size_t block_dim = 1;
};

struct DirectPropagation {
  /// terms[k] after dedup; v_k = max over terms[k].
  std::vector<std::vector<QuadraticForm>> terms;
  /// rank_trace[j] = pre-dedup term count at step K - j.
  std::vector<std::size_t> rank_trace;

  double value(std::size_t k, const Vector &x) const;
};

class RankBudgetExceeded : public std::runtime_error {
public:
  RankBudgetExceeded(const std::string &what,
                     std::vector<std::size_t> trace_so_far)
      : std::runtime_error(what), trace(std::move(trace_so_far)) {}
  std::vector<std::size_t> trace;
};

DirectPropagation direct_propagation(const SeparableQuadraticProblem &problem,
                                     std::size_t K, double dedup_tol = 0.0,
                                     std::size_t budget = 100000);

/// Swarm without Coulomb term; terminal = max of r0 shifted wells, -W
/// replaced by the max of R distinct separable quadratics.
SeparableQuadraticProblem direct_propagation_example(const NBodyParams &p,
                                                     std::size_t r0,
                                                     std::size_t R);

/// Single-particle version of an interaction-free separable problem for
/// particle `block` (terminal must have rank one).
SeparableQuadraticProblem restrict_to_block(
    const SeparableQuadraticProblem &problem, std::size_t block);

} // namespace troptraj

#endif // TROPTRAJ_ORACLES_HPP
