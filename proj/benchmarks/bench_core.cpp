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


#include <random>

#include <benchmark/benchmark.h>

#include "troptraj/nbody.hpp"
#include "troptraj/solver.hpp"

using namespace troptraj;

namespace {

NBodyParams swarm(std::size_t N, std::size_t K) {
  NBodyParams p;
  p.N = N;
  p.K = K;
  p.h = 0.04;
  p.T = double(K) * p.h;
  return p;
}

MaxPlusValueTable random_table(std::size_t n, std::size_t rank) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  MaxPlusValueTable t(n, 2.0);
  while (t.rank() < rank) {
    QuadraticSupport w{g(rng), Vector(Eigen::Index(n)), Vector(Eigen::Index(n)), 2.0};
    for (std::size_t i = 0; i < n; ++i) {
      w.slope[Eigen::Index(i)] = g(rng);
      w.anchor[Eigen::Index(i)] = g(rng);
    }
    t.insert(std::move(w));
  }
  return t;
}

void BM_EvalMaxPlus(benchmark::State &st) {
  const auto n = std::size_t(st.range(0));
  const auto t = random_table(n, std::size_t(st.range(1)));
  const Vector x = Vector::Ones(Eigen::Index(n));
  for (auto _ : st)
    benchmark::DoNotOptimize(t.eval(x).value);
  st.SetItemsProcessed(st.iterations() * st.range(1));
}
BENCHMARK(BM_EvalMaxPlus)->Args({10, 50})->Args({200, 50})->Args({200, 500});

void BM_CoulombGradient(benchmark::State &st) {
  const auto p = swarm(std::size_t(st.range(0)), 10);
  const Vector x = annulus_state(p, 1.0, 2.0, 3);
  for (auto _ : st)
    benchmark::DoNotOptimize(coulomb_gradient(p, x).data());
}
BENCHMARK(BM_CoulombGradient)->Arg(5)->Arg(100);

void BM_Iteration(benchmark::State &st) {
  const auto p = swarm(std::size_t(st.range(0)), 100);
  auto problem = make_nbody_problem(p, curvature_gamma(p, CurvatureMode::pairwise), "pairwise");
  problem.schedule = ScheduleKind::control_aware;
  auto state = init(problem, circle_state(p, 10.0), p.K, ZeroControl{}, MinusInfinityBound{});
  for (auto _ : st)
    run(problem, state, 1);
  st.counters["rank0"] = double(state.tables[0].rank());
}
BENCHMARK(BM_Iteration)->Arg(5)->Arg(100)->Unit(benchmark::kMillisecond)->Iterations(20);

} // namespace

BENCHMARK_MAIN();
