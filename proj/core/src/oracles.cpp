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

#include "troptraj/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "troptraj/parallel.hpp"

namespace troptraj {

// ---------------------------------------------------------------------------
// Riccati

RiccatiSolution riccati_solve(const NBodyParams &p) {
  p.validate();
  if (p.kappa != 0.0)
    throw std::invalid_argument("riccati_solve: requires kappa == 0");
  RiccatiSolution sol;
  sol.h = p.h;
  sol.s.assign(p.K + 1, 0.0);
  sol.gain.assign(p.K, 0.0);
  sol.s[p.K] = -p.k_T;
  // max_u -h(k x^2 + R u^2)/2 + s (x + h u)^2 / 2 with s <= 0.
  for (std::size_t k = p.K; k-- > 0;) {
    const double s = sol.s[k + 1];
    const double denom = p.R_diag - p.h * s;
    sol.gain[k] = s / denom;
    sol.s[k] = -p.h * p.k_trap + s * p.R_diag / denom;
  }
  return sol;
}

double RiccatiSolution::value(std::size_t k, const Vector &x) const {
  return 0.5 * s.at(k) * x.squaredNorm();
}

double RiccatiSolution::residual(const NBodyParams &p) const {
  double worst = std::abs(s.back() + p.k_T);
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    const double next = s[k + 1];
    const double expected =
        -p.h * p.k_trap + next * p.R_diag / (p.R_diag - p.h * next);
    worst = std::max(worst, std::abs(s[k] - expected));
  }
  return worst;
}

Trajectory RiccatiSolution::rollout(const ControlProblem &problem,
                                    const Vector &x0) const {
  std::vector<Vector> controls;
  Vector x = x0;
  for (double g : gain) {
    controls.push_back(g * x);
    x = step_dynamics(problem.dynamics, x, controls.back());
  }
  return troptraj::rollout(problem, x0, std::move(controls));
}

// ---------------------------------------------------------------------------
// Grid value iteration

namespace {

struct Strides {
  std::vector<std::size_t> size;
  std::vector<std::size_t> stride;
  std::size_t total = 1;

  explicit Strides(const std::vector<GridAxis> &axes) {
    for (const auto &a : axes) {
      size.push_back(a.nodes);
      stride.push_back(total);
      total *= a.nodes;
    }
  }
  std::size_t coord(std::size_t flat, std::size_t dim) const {
    return (flat / stride[dim]) % size[dim];
  }
};

Vector grid_point(const std::vector<GridAxis> &axes, const Strides &st,
                  std::size_t flat) {
  Vector x(Eigen::Index(axes.size()));
  for (std::size_t i = 0; i < axes.size(); ++i)
    x[Eigen::Index(i)] = axes[i].node(st.coord(flat, i));
  return x;
}

double interpolate(const std::vector<GridAxis> &axes, const Strides &st,
                   const std::vector<double> &values, const Vector &x) {
  const std::size_t n = axes.size();
  std::size_t base[3];
  double frac[3];
  for (std::size_t i = 0; i < n; ++i) {
    const GridAxis &a = axes[i];
    const double t =
        std::clamp((x[Eigen::Index(i)] - a.lower) / a.step(), 0.0,
                   double(a.nodes - 1));
    std::size_t cell =
        std::min(static_cast<std::size_t>(std::floor(t)), a.nodes - 2);
    base[i] = cell;
    frac[i] = t - double(cell);
  }
  double out = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << n); ++corner) {
    double weight = 1.0;
    std::size_t flat = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool up = (corner >> i) & 1U;
      weight *= up ? frac[i] : 1.0 - frac[i];
      flat += (base[i] + (up ? 1 : 0)) * st.stride[i];
    }
    if (weight != 0.0)
      out += weight * values[flat];
  }
  return out;
}

/// max over nodes and dims of |second difference| / step^2 * step^2 / 8.
double interpolation_bound(const std::vector<GridAxis> &axes,
                           const Strides &st,
                           const std::vector<double> &values) {
  double bound = 0.0;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    double worst = 0.0;
    for (std::size_t flat = 0; flat < st.total; ++flat) {
      const std::size_t c = st.coord(flat, i);
      if (c == 0 || c + 1 == st.size[i])
        continue;
      const double d2 = values[flat + st.stride[i]] - 2.0 * values[flat] +
                        values[flat - st.stride[i]];
      worst = std::max(worst, std::abs(d2));
    }
    bound += worst / 8.0;
  }
  return bound;
}

bool inside(const std::vector<GridAxis> &axes, const Vector &y) {
  for (std::size_t i = 0; i < axes.size(); ++i)
    if (y[Eigen::Index(i)] < axes[i].lower || y[Eigen::Index(i)] > axes[i].upper)
      return false;
  return true;
}

} // namespace

std::size_t GridValue::node_count() const {
  std::size_t total = 1;
  for (const auto &a : state_axes)
    total *= a.nodes;
  return total;
}

Vector GridValue::node(std::size_t flat) const {
  return grid_point(state_axes, Strides(state_axes), flat);
}

double GridValue::value(std::size_t k, const Vector &x) const {
  return interpolate(state_axes, Strides(state_axes), values.at(k), x);
}

GridValue grid_value_iteration(const ControlProblem &problem, std::size_t K,
                               const GridOptions &options) {
  problem.validate();
  const std::size_t n = problem.state_dim();
  const std::size_t m = problem.control_dim();
  if (n > 3 || options.state_axes.size() != n)
    throw std::invalid_argument(
        "grid_value_iteration: needs one axis per state dimension, n <= 3");
  if (m > 3 || options.control_axes.size() != m)
    throw std::invalid_argument(
        "grid_value_iteration: needs one axis per control dimension, m <= 3");
  for (const auto &a : options.state_axes)
    if (a.nodes < 3 || !(a.upper > a.lower))
      throw std::invalid_argument("grid_value_iteration: bad state axis");
  for (const auto &a : options.control_axes)
    if (a.nodes < 2 || !(a.upper >= a.lower))
      throw std::invalid_argument("grid_value_iteration: bad control axis");

  GridValue grid;
  grid.state_axes = options.state_axes;
  grid.control_axes = options.control_axes;
  const Strides xs(grid.state_axes);
  const Strides us(grid.control_axes);
  const double h = problem.dynamics.h;

  std::vector<Vector> nodes(xs.total);
  std::vector<double> h_rho(xs.total);
  for (std::size_t f = 0; f < xs.total; ++f) {
    nodes[f] = grid_point(grid.state_axes, xs, f);
    h_rho[f] = h * problem.reward.state_reward(nodes[f]).value;
  }
  std::vector<Vector> controls(us.total);
  std::vector<double> penalty(us.total);
  for (std::size_t f = 0; f < us.total; ++f) {
    controls[f] = grid_point(grid.control_axes, us, f);
    penalty[f] = control_penalty(problem.reward, h, controls[f]);
  }

  grid.values.assign(K + 1, std::vector<double>(xs.total));
  grid.tolerance.assign(K + 1, 0.0);
  for (std::size_t f = 0; f < xs.total; ++f)
    grid.values[K][f] = problem.terminal.eval(nodes[f]).value;

  double control_step_sq = 0.0;
  for (const auto &a : grid.control_axes)
    control_step_sq = std::max(control_step_sq, a.step() * a.step());

  const std::size_t workers = parallel_workers(xs.total);
  for (std::size_t k = K; k-- > 0;) {
    const std::vector<double> &next = grid.values[k + 1];
    std::vector<double> &cur = grid.values[k];
    std::vector<std::size_t> clips(workers, 0), excluded(workers, 0),
        binding(workers, 0);
    std::vector<double> control_curv(workers, 0.0);
    std::vector<std::string> errors(workers);

    parallel_for(xs.total, [&](std::size_t begin, std::size_t end,
                               std::size_t w) {
      std::vector<double> objective(us.total);
      std::vector<char> admissible(us.total);
      for (std::size_t f = begin; f < end && errors[w].empty(); ++f) {
        const Vector drift = problem.dynamics.velocity_form
                                 ? nodes[f]
                                 : Vector(problem.dynamics.A * nodes[f] +
                                          problem.dynamics.b);
        double best = kMinusInfinity;
        std::size_t best_u = 0;
        for (std::size_t c = 0; c < us.total; ++c) {
          Vector y = problem.dynamics.velocity_form
                         ? Vector(drift + h * controls[c])
                         : Vector(drift + problem.dynamics.B * controls[c]);
          admissible[c] = 1;
          if (!inside(grid.state_axes, y)) {
            if (options.boundary == BoundaryRule::reject) {
              std::ostringstream msg;
              msg << "grid_value_iteration: successor leaves the state box at "
                     "step "
                  << k << ", x = [" << nodes[f].transpose() << "], u = ["
                  << controls[c].transpose() << "]";
              errors[w] = msg.str();
              break;
            }
            if (options.boundary == BoundaryRule::exclude) {
              admissible[c] = 0;
              ++excluded[w];
              objective[c] = kMinusInfinity;
              continue;
            }
            ++clips[w];
            for (std::size_t i = 0; i < n; ++i)
              y[Eigen::Index(i)] =
                  std::clamp(y[Eigen::Index(i)], grid.state_axes[i].lower,
                             grid.state_axes[i].upper);
          }
          objective[c] =
              h_rho[f] + penalty[c] + interpolate(grid.state_axes, xs, next, y);
          if (objective[c] > best) {
            best = objective[c];
            best_u = c;
          }
        }
        if (!errors[w].empty())
          break;
        if (best == kMinusInfinity) {
          std::ostringstream msg;
          msg << "grid_value_iteration: no admissible control at x = ["
              << nodes[f].transpose() << "]";
          errors[w] = msg.str();
          break;
        }
        cur[f] = best;
        bool binds = false;
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t ci = us.coord(best_u, i);
          if (ci == 0 || ci + 1 == us.size[i]) {
            binds = true;
            continue;
          }
          const std::size_t lo = best_u - us.stride[i];
          const std::size_t hi = best_u + us.stride[i];
          if (!admissible[lo] || !admissible[hi]) {
            binds = true;
            continue;
          }
          const double d2 = objective[hi] - 2.0 * objective[best_u] +
                            objective[lo];
          const double step = grid.control_axes[i].step();
          control_curv[w] = std::max(control_curv[w], std::abs(d2) / (step * step));
        }
        if (binds)
          ++binding[w];
      }
    });
    for (const auto &e : errors)
      if (!e.empty())
        throw GridBoxError(e);
    double curv = 0.0;
    for (std::size_t w = 0; w < workers; ++w) {
      grid.clip_count += clips[w];
      grid.excluded_count += excluded[w];
      grid.binding_count += binding[w];
      curv = std::max(curv, control_curv[w]);
    }
    // Missing a concave maximum by at most half a control step.
    const double control_err = double(m) * curv * control_step_sq / 8.0;
    const double interp_err = interpolation_bound(grid.state_axes, xs, next);
    grid.tolerance[k] = grid.tolerance[k + 1] +
                        options.tolerance_safety * (interp_err + control_err);
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Direct propagation

double QuadraticForm::eval(const Vector &x) const {
  return constant + linear.dot(x) + 0.5 * x.dot(hessian * x);
}

QuadraticForm QuadraticForm::operator+(const QuadraticForm &o) const {
  return {constant + o.constant, linear + o.linear, hessian + o.hessian};
}

QuadraticForm QuadraticForm::scaled(double s) const {
  return {s * constant, s * linear, s * hessian};
}

bool QuadraticForm::block_separable(std::size_t block_dim, double tol) const {
  const auto n = hessian.rows();
  const auto b = static_cast<Eigen::Index>(block_dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i / b != j / b && std::abs(hessian(i, j)) > tol)
        return false;
  return true;
}

QuadraticForm QuadraticForm::zero(std::size_t n) {
  const auto m = static_cast<Eigen::Index>(n);
  return {0.0, Vector::Zero(m), Matrix::Zero(m, m)};
}

QuadraticForm QuadraticForm::well(const Vector &center, double stiffness) {
  const auto n = center.size();
  // -(s/2)|x - c|^2 = -(s/2)|c|^2 + s c.x - (s/2)|x|^2
  return {-0.5 * stiffness * center.squaredNorm(), stiffness * center,
          -stiffness * Matrix::Identity(n, n)};
}

namespace {

/// x -> max_u { -(h/2) u'Qu + q(Ax + Bu + b) } in closed form.
QuadraticForm bellman_image(const AffineDynamics &dyn, const Matrix &Q,
                            const QuadraticForm &q) {
  const Matrix M = dyn.h * Q - dyn.B.transpose() * q.hessian * dyn.B;
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(
        "direct_propagation: inner problem is not strongly concave");
  const Matrix P = dyn.B * llt.solve(dyn.B.transpose());
  const Vector Pg = P * q.linear;
  const double cz = q.constant + 0.5 * q.linear.dot(Pg);
  const Vector gz = q.linear + q.hessian * Pg;
  const Matrix Hz = q.hessian + q.hessian * P * q.hessian;
  QuadraticForm out;
  out.hessian = dyn.A.transpose() * Hz * dyn.A;
  out.hessian = 0.5 * (out.hessian + out.hessian.transpose());
  out.linear = dyn.A.transpose() * (gz + Hz * dyn.b);
  out.constant = cz + gz.dot(dyn.b) + 0.5 * dyn.b.dot(Hz * dyn.b);
  return out;
}

bool same_form(const QuadraticForm &a, const QuadraticForm &b, double tol) {
  const double scale =
      std::max({std::abs(a.constant), std::abs(b.constant),
                a.linear.lpNorm<Eigen::Infinity>(),
                b.linear.lpNorm<Eigen::Infinity>(),
                a.hessian.lpNorm<Eigen::Infinity>(),
                b.hessian.lpNorm<Eigen::Infinity>()});
  const double dev = std::max(
      {std::abs(a.constant - b.constant),
       (a.linear - b.linear).lpNorm<Eigen::Infinity>(),
       (a.hessian - b.hessian).lpNorm<Eigen::Infinity>()});
  return dev <= tol * scale;
}

} // namespace

double DirectPropagation::value(std::size_t k, const Vector &x) const {
  double best = kMinusInfinity;
  for (const auto &q : terms.at(k))
    best = std::max(best, q.eval(x));
  return best;
}

DirectPropagation direct_propagation(const SeparableQuadraticProblem &problem,
                                     std::size_t K, double dedup_tol,
                                     std::size_t budget) {
  if (problem.terminal.empty())
    throw std::invalid_argument("direct_propagation: empty terminal");
  const std::size_t n = problem.dynamics.state_dim();
  std::vector<QuadraticForm> interaction = problem.interaction;
  if (interaction.empty())
    interaction.push_back(QuadraticForm::zero(n));

  DirectPropagation out;
  out.terms.resize(K + 1);
  auto dedup = [&](std::vector<QuadraticForm> forms) {
    std::vector<QuadraticForm> kept;
    for (auto &f : forms) {
      const bool dup = std::any_of(kept.begin(), kept.end(), [&](const auto &g) {
        return same_form(f, g, dedup_tol);
      });
      if (!dup)
        kept.push_back(std::move(f));
    }
    return kept;
  };
  out.rank_trace.push_back(problem.terminal.size());
  out.terms[K] = dedup(problem.terminal);

  const double h = problem.dynamics.h;
  for (std::size_t k = K; k-- > 0;) {
    const std::size_t count = interaction.size() * out.terms[k + 1].size();
    if (count > budget)
      throw RankBudgetExceeded("direct_propagation: rank " +
                                   std::to_string(count) + " exceeds budget",
                               out.rank_trace);
    out.rank_trace.push_back(count);
    std::vector<QuadraticForm> images;
    images.reserve(out.terms[k + 1].size());
    for (const auto &w : out.terms[k + 1])
      images.push_back(
          bellman_image(problem.dynamics, problem.control_quadratic, w));
    std::vector<QuadraticForm> next;
    next.reserve(count);
    for (const auto &q : interaction)
      for (const auto &img : images)
        next.push_back((problem.local_reward + q).scaled(h) + img);
    out.terms[k] = dedup(std::move(next));
  }
  return out;
}

SeparableQuadraticProblem direct_propagation_example(const NBodyParams &p,
                                                     std::size_t r0,
                                                     std::size_t R) {
  if (r0 == 0 || R == 0)
    throw std::invalid_argument("direct_propagation_example: r0, R >= 1");
  const std::size_t n = p.state_dim();
  const auto m = static_cast<Eigen::Index>(n);
  SeparableQuadraticProblem prob;
  prob.dynamics = velocity_dynamics(n, p.h);
  prob.control_quadratic = p.R_diag * Matrix::Identity(m, m);
  prob.local_reward = QuadraticForm::well(Vector::Zero(m), p.k_trap);
  prob.block_dim = p.d;
  for (std::size_t j = 0; j < r0; ++j) {
    Vector center = Vector::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i)
      center[i] = 0.25 * double(j) * (i % 2 == 0 ? 1.0 : -1.0);
    prob.terminal.push_back(QuadraticForm::well(center, p.k_T));
  }
  if (R > 1)
    for (std::size_t r = 0; r < R; ++r) {
      QuadraticForm q = QuadraticForm::well(Vector::Constant(m, 0.1 * double(r)),
                                            0.05 * double(r + 1));
      q.constant -= 0.01 * double(r);
      prob.interaction.push_back(std::move(q));
    }
  return prob;
}

SeparableQuadraticProblem
restrict_to_block(const SeparableQuadraticProblem &problem,
                  std::size_t block) {
  const auto b = static_cast<Eigen::Index>(problem.block_dim);
  const auto off = static_cast<Eigen::Index>(block) * b;
  if (!problem.interaction.empty())
    throw std::invalid_argument("restrict_to_block: interaction must be empty");
  if (problem.terminal.size() != 1)
    throw std::invalid_argument("restrict_to_block: terminal must be rank one");
  const auto restrict = [&](const QuadraticForm &q) {
    if (!q.block_separable(problem.block_dim))
      throw std::invalid_argument("restrict_to_block: form is not separable");
    return QuadraticForm{block == 0 ? q.constant : 0.0, q.linear.segment(off, b),
                         q.hessian.block(off, off, b, b)};
  };
  SeparableQuadraticProblem out;
  const auto &dyn = problem.dynamics;
  out.dynamics = make_affine_dynamics(
      dyn.A.block(off, off, b, b), dyn.B.block(off, off, b, b),
      dyn.b.segment(off, b), dyn.h);
  out.control_quadratic = problem.control_quadratic.block(off, off, b, b);
  out.local_reward = restrict(problem.local_reward);
  out.terminal.push_back(restrict(problem.terminal.front()));
  out.block_dim = problem.block_dim;
  return out;
}

} // namespace troptraj
