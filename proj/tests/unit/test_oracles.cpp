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


#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "troptraj/nbody.hpp"
#include "troptraj/oracles.hpp"
#include "troptraj/solver.hpp"

using namespace troptraj;

namespace {

NBodyParams params(std::size_t N, std::size_t d, std::size_t K, double h) {
  NBodyParams p;
  p.N = N;
  p.d = d;
  p.K = K;
  p.h = h;
  p.T = double(K) * h;
  p.kappa = 0.0;
  return p;
}

ControlProblem line_problem(const NBodyParams &p) {
  return make_nbody_problem(p, curvature_gamma(p, CurvatureMode::analytic),
                            "analytic");
}

GridOptions line_grid(double lo, double hi, std::size_t nodes, double ulo,
                      double uhi, std::size_t unodes) {
  GridOptions g;
  g.state_axes = {GridAxis{lo, hi, nodes}};
  g.control_axes = {GridAxis{ulo, uhi, unodes}};
  return g;
}

Vector scalar(double x) { return Vector::Constant(1, x); }

} // namespace

TEST(Riccati, OneStepCompletionOfSquares) {
  auto p = params(1, 1, 1, 1.0);
  p.k_trap = 0.0;
  p.R_diag = 1.0;
  p.k_T = 1.0;
  const auto r = riccati_solve(p);
  EXPECT_NEAR(r.s[0], -0.5, 1e-15);
  EXPECT_NEAR(r.gain[0], -0.5, 1e-15);
  EXPECT_NEAR(r.value(0, scalar(2.0)), -1.0, 1e-15);
  // cross-check by 1-D grid search at x = 1.3
  double best = kMinusInfinity;
  for (int i = 0; i <= 40000; ++i) {
    const double u = -2.0 + 1e-4 * i;
    best = std::max(best, -0.5 * u * u - 0.5 * (1.3 + u) * (1.3 + u));
  }
  EXPECT_NEAR(r.value(0, scalar(1.3)), best, 1e-8);
}

TEST(Riccati, FreeProblemIsZero) {
  auto p = params(2, 2, 10, 0.1);
  p.k_trap = 0.0;
  p.k_T = 0.0;
  const auto r = riccati_solve(p);
  for (double s : r.s)
    EXPECT_EQ(s, 0.0);
  for (double g : r.gain)
    EXPECT_EQ(g, 0.0);
}

TEST(Riccati, ResidualAndTerminal) {
  const auto p = params(3, 2, 200, 0.05);
  const auto r = riccati_solve(p);
  ASSERT_EQ(r.s.size(), 201u);
  ASSERT_EQ(r.gain.size(), 200u);
  EXPECT_EQ(r.s.back(), -p.k_T);
  EXPECT_LE(r.residual(p), 1e-10);
}

TEST(Riccati, RejectsInteraction) {
  auto p = params(2, 2, 10, 0.1);
  p.kappa = 1.0;
  EXPECT_THROW(riccati_solve(p), std::invalid_argument);
}

TEST(Riccati, RolloutMatchesValue) {
  const auto p = params(2, 2, 50, 0.05);
  const auto pb = line_problem(p);
  const auto r = riccati_solve(p);
  const Vector x0 = circle_state(p, 3.0);
  const auto t = r.rollout(pb, x0);
  EXPECT_NEAR(t.realized_reward, r.value(0, x0), 1e-10 * std::abs(r.value(0, x0)));
}

TEST(Grid, MatchesRiccatiOnALine) {
  const auto p = params(1, 1, 20, 0.05);
  const auto pb = line_problem(p);
  const auto ric = riccati_solve(p);
  const auto g = grid_value_iteration(pb, p.K, line_grid(-5, 5, 2001, -40, 40, 801));
  EXPECT_EQ(g.clip_count, 0u);
  EXPECT_EQ(g.binding_count, 0u);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const Vector x = g.node(i);
    worst = std::max(worst, std::abs(g.values[0][i] - ric.value(0, x)));
  }
  EXPECT_LE(worst, 1e-3);
  EXPECT_NEAR(g.value(0, scalar(3.0)), ric.value(0, scalar(3.0)), 1e-3);
  // the grid is a max over fewer controls: never above the exact value
  EXPECT_LE(g.value(0, scalar(3.0)), ric.value(0, scalar(3.0)) + 1e-12);
  EXPECT_GE(g.tolerance[0], 0.0);
}

TEST(Grid, ConstantPropagation) {
  auto p = params(1, 1, 5, 0.1);
  p.k_trap = 0.0;
  p.k_T = 0.0;
  auto pb = make_nbody_problem(p, 0.0, "zero");
  MaxPlusValueTable phi(1, 0.0);
  phi.insert({3.25, Vector::Zero(1), Vector::Zero(1), 0.0});
  pb.terminal = phi;
  const auto g = grid_value_iteration(pb, 5, line_grid(-1, 1, 21, -1, 1, 11));
  for (const auto &vk : g.values)
    for (double v : vk)
      EXPECT_DOUBLE_EQ(v, 3.25);
}

TEST(Grid, RefinementWithinReportedTolerance) {
  const auto p = params(1, 1, 20, 0.05);
  const auto pb = line_problem(p);
  const auto coarse = grid_value_iteration(pb, p.K, line_grid(-5, 5, 401, -40, 40, 161));
  const auto fine = grid_value_iteration(pb, p.K, line_grid(-5, 5, 801, -40, 40, 321));
  const double x = 3.0;
  EXPECT_LE(std::abs(coarse.value(0, scalar(x)) - fine.value(0, scalar(x))),
            coarse.tolerance[0]);
  EXPECT_LE(fine.tolerance[0], coarse.tolerance[0]);
}

TEST(Grid, RejectRuleNamesOffendingPair) {
  const auto p = params(1, 1, 3, 0.5);
  const auto pb = line_problem(p);
  auto opt = line_grid(-1, 1, 11, -2, 2, 5);
  opt.boundary = BoundaryRule::reject;
  try {
    grid_value_iteration(pb, p.K, opt);
    FAIL() << "expected GridBoxError";
  } catch (const GridBoxError &e) {
    EXPECT_NE(std::string(e.what()).find("u"), std::string::npos);
  }
}

TEST(Grid, ClipAndExcludeCounts) {
  const auto p = params(1, 1, 3, 0.5);
  const auto pb = line_problem(p);
  auto opt = line_grid(-1, 1, 11, -2, 2, 5);
  opt.boundary = BoundaryRule::clip;
  const auto clipped = grid_value_iteration(pb, p.K, opt);
  EXPECT_GT(clipped.clip_count, 0u);
  opt.boundary = BoundaryRule::exclude;
  const auto excluded = grid_value_iteration(pb, p.K, opt);
  EXPECT_EQ(excluded.clip_count, 0u);
  EXPECT_GT(excluded.excluded_count, 0u);
}

TEST(Grid, DimensionLimit) {
  const auto p = params(2, 2, 2, 0.1);
  const auto pb = line_problem(p);
  GridOptions opt;
  for (int i = 0; i < 4; ++i) {
    opt.state_axes.push_back({-1, 1, 3});
    opt.control_axes.push_back({-1, 1, 3});
  }
  EXPECT_THROW(grid_value_iteration(pb, 2, opt), std::invalid_argument);
}

TEST(Grid, SolverStaysBelowOracle) {
  const auto p = params(1, 1, 20, 0.05);
  const auto pb = line_problem(p);
  const auto g = grid_value_iteration(pb, p.K, line_grid(-5, 5, 2001, -40, 40, 801));
  auto s = init(pb, scalar(3.0), p.K, ZeroControl{}, MinusInfinityBound{});
  for (int m = 0; m < 10; ++m) {
    run(pb, s, 1);
    for (std::size_t k = 0; k <= p.K; ++k)
      for (std::size_t i = 0; i < g.node_count(); i += 7) {
        const Vector x = g.node(i);
        EXPECT_LE(s.tables[k].eval(x).value, g.values[k][i] + g.tolerance[k]);
      }
  }
  const auto audit = support_validity_audit(pb, s, {scalar(-5), scalar(5)}, 200, 1, &g);
  EXPECT_TRUE(audit.ok());
  EXPECT_GT(audit.oracle_checks, 0u);
}

TEST(QuadraticForm, Helpers) {
  const auto w = QuadraticForm::well(Vector::Constant(2, 1.0), 4.0);
  Vector x(2);
  x << 2, 1;
  EXPECT_DOUBLE_EQ(w.eval(x), -2.0);
  EXPECT_DOUBLE_EQ(w.eval(Vector::Ones(2)), 0.0);
  EXPECT_TRUE(w.block_separable(1));
  const auto sum = w + w.scaled(2.0);
  EXPECT_DOUBLE_EQ(sum.eval(x), -6.0);
  auto coupled = QuadraticForm::zero(2);
  coupled.hessian(0, 1) = coupled.hessian(1, 0) = 0.5;
  EXPECT_FALSE(coupled.block_separable(1));
  EXPECT_TRUE(coupled.block_separable(2));
}

TEST(Direct, RankOneStaysRankOne) {
  const auto p = params(2, 2, 5, 0.1);
  const auto prob = direct_propagation_example(p, 1, 1);
  const auto d = direct_propagation(prob, 5);
  ASSERT_EQ(d.rank_trace.size(), 6u);
  for (auto r : d.rank_trace)
    EXPECT_EQ(r, 1u);
}

TEST(Direct, WorstCaseRankTrace) {
  const auto p = params(2, 2, 3, 0.1);
  const auto prob = direct_propagation_example(p, 2, 3);
  const auto d = direct_propagation(prob, 3);
  const std::vector<std::size_t> want{2, 6, 18, 54};
  EXPECT_EQ(d.rank_trace, want);
  for (std::size_t j = 0; j < d.rank_trace.size(); ++j)
    EXPECT_LE(d.rank_trace[j], 2 * std::size_t(std::pow(3, j)));
}

TEST(Direct, BudgetExceededKeepsTrace) {
  const auto p = params(2, 2, 6, 0.1);
  const auto prob = direct_propagation_example(p, 2, 3);
  try {
    direct_propagation(prob, 6, 0.0, 100);
    FAIL() << "expected RankBudgetExceeded";
  } catch (const RankBudgetExceeded &e) {
    EXPECT_EQ(e.trace, (std::vector<std::size_t>{2, 6, 18, 54}));
  }
}

TEST(Direct, SeparableValueIsSumOfParticleValues) {
  const auto p = params(2, 2, 6, 0.1);
  const auto prob = direct_propagation_example(p, 1, 1);
  const auto joint = direct_propagation(prob, 6);
  const auto a = direct_propagation(restrict_to_block(prob, 0), 6);
  const auto b = direct_propagation(restrict_to_block(prob, 1), 6);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int t = 0; t < 20; ++t) {
    Vector x(4);
    for (int i = 0; i < 4; ++i)
      x[i] = g(rng);
    for (std::size_t k = 0; k <= 6; ++k) {
      const double whole = joint.value(k, x);
      const double parts = a.value(k, x.segment(0, 2)) + b.value(k, x.segment(2, 2));
      EXPECT_NEAR(whole, parts, 1e-10 * std::max(1.0, std::abs(whole)));
    }
  }
  for (const auto &q : joint.terms[0])
    EXPECT_TRUE(q.block_separable(2, 1e-14));
}

TEST(Direct, RankOneMatchesRiccati) {
  const auto p = params(2, 2, 6, 0.1);
  const auto d = direct_propagation(direct_propagation_example(p, 1, 1), 6);
  const auto r = riccati_solve(p);
  Vector x(4);
  x << 1.0, -2.0, 0.5, 3.0;
  for (std::size_t k = 0; k <= 6; ++k)
    EXPECT_NEAR(d.value(k, x), r.value(k, x), 1e-10 * std::abs(r.value(k, x)));
}

TEST(Direct, RestrictionRequiresNoInteraction) {
  const auto p = params(2, 2, 7, 0.1);
  EXPECT_THROW(restrict_to_block(direct_propagation_example(p, 1, 2), 0),
               std::invalid_argument);
}
