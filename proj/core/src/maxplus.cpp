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

#include "troptraj/maxplus.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "troptraj/parallel.hpp"

namespace troptraj {
namespace {

void require_dim(std::size_t expected, Eigen::Index got, const char *what) {
  if (static_cast<std::size_t>(got) != expected)
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(expected) + " vs " +
                                std::to_string(got) + ")");
}

double linf(const QuadraticSupport &w) {
  double m = std::abs(w.beta);
  if (w.slope.size() > 0)
    m = std::max(m, w.slope.lpNorm<Eigen::Infinity>());
  if (w.anchor.size() > 0)
    m = std::max(m, w.anchor.lpNorm<Eigen::Infinity>());
  return m;
}

} // namespace

void QuadraticSupport::validate() const {
  if (anchor.size() == 0)
    throw std::invalid_argument("QuadraticSupport: empty anchor");
  if (slope.size() != anchor.size())
    throw std::invalid_argument("QuadraticSupport: slope/anchor size differ");
  if (!(curvature >= 0.0) || !std::isfinite(curvature))
    throw std::invalid_argument("QuadraticSupport: curvature must be >= 0");
  if (!std::isfinite(beta) || !slope.allFinite() || !anchor.allFinite())
    throw std::invalid_argument("QuadraticSupport: non-finite entry");
}

double eval_support(const QuadraticSupport &w, const Vector &x) {
  require_dim(w.dim(), x.size(), "eval_support");
  const Eigen::Index n = x.size();
  double linear = 0.0;
  double square = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dx = x[i] - w.anchor[i];
    linear += w.slope[i] * dx;
    square += dx * dx;
  }
  return w.beta + linear - 0.5 * w.curvature * square;
}

double eval_support_block(const QuadraticSupport &w, const Vector &x,
                          std::size_t offset, std::size_t size) {
  require_dim(w.dim(), x.size(), "eval_support_block");
  if (offset + size > w.dim())
    throw std::out_of_range("eval_support_block: block outside state");
  double linear = 0.0;
  double square = 0.0;
  for (std::size_t i = offset; i < offset + size; ++i) {
    const double dx = x[i] - w.anchor[i];
    linear += w.slope[i] * dx;
    square += dx * dx;
  }
  return linear - 0.5 * w.curvature * square;
}

Vector grad_support(const QuadraticSupport &w, const Vector &x) {
  require_dim(w.dim(), x.size(), "grad_support");
  return w.slope - w.curvature * (x - w.anchor);
}

bool is_duplicate(const QuadraticSupport &lhs, const QuadraticSupport &rhs,
                  double tol) {
  if (lhs.dim() != rhs.dim())
    return false;
  double dev = std::abs(lhs.beta - rhs.beta);
  dev = std::max(dev, (lhs.slope - rhs.slope).lpNorm<Eigen::Infinity>());
  dev = std::max(dev, (lhs.anchor - rhs.anchor).lpNorm<Eigen::Infinity>());
  return dev <= tol * std::max(linf(lhs), linf(rhs));
}

ProbeSet make_probes(std::span<const Vector> seeds, const ProbeSpec &spec,
                     std::mt19937_64 &rng) {
  ProbeSet probes;
  const auto full = [&] { return probes.size() >= spec.max_probes; };
  if (spec.include_seeds)
    for (const auto &s : seeds) {
      if (full())
        return probes;
      probes.add(s, ProbeProvenance::trajectory);
    }
  std::normal_distribution<double> gauss(0.0, spec.sigma);
  for (std::size_t rep = 0; rep < spec.perturbations_per_seed; ++rep)
    for (const auto &s : seeds) {
      if (full())
        return probes;
      Vector p = s;
      for (Eigen::Index i = 0; i < p.size(); ++i)
        p[i] += gauss(rng);
      probes.add(std::move(p), ProbeProvenance::perturbation);
    }
  if (spec.uniform_count > 0) {
    if (spec.box_lower.size() == 0 ||
        spec.box_lower.size() != spec.box_upper.size())
      throw std::invalid_argument("make_probes: uniform box not set");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t j = 0; j < spec.uniform_count; ++j) {
      if (full())
        return probes;
      Vector p(spec.box_lower.size());
      for (Eigen::Index i = 0; i < p.size(); ++i)
        p[i] = spec.box_lower[i] +
               unit(rng) * (spec.box_upper[i] - spec.box_lower[i]);
      probes.add(std::move(p), ProbeProvenance::uniform_box);
    }
  }
  return probes;
}

MaxPlusValueTable::MaxPlusValueTable(std::size_t dim, double curvature)
    : dim_(dim), curvature_(curvature) {
  if (dim == 0)
    throw std::invalid_argument("MaxPlusValueTable: dim must be >= 1");
  if (!(curvature >= 0.0) || !std::isfinite(curvature))
    throw std::invalid_argument("MaxPlusValueTable: curvature must be >= 0");
}

MaxPlusEval MaxPlusValueTable::eval(const Vector &x) const {
  require_dim(dim_, x.size(), "eval_maxplus");
  MaxPlusEval out;
  for (std::size_t j = 0; j < supports_.size(); ++j) {
    const double v = eval_support(supports_[j], x);
    if (!out.active || v > out.value) {
      out.value = v;
      out.active = j;
    }
  }
  return out;
}

std::optional<std::size_t>
MaxPlusValueTable::find_duplicate(const QuadraticSupport &w,
                                  double tol) const {
  for (std::size_t j = 0; j < supports_.size(); ++j)
    if (is_duplicate(supports_[j], w, tol))
      return j;
  return std::nullopt;
}

bool MaxPlusValueTable::insert(QuadraticSupport w, double tol) {
  w.validate();
  if (w.dim() != dim_)
    throw std::invalid_argument("insert_support: dimension mismatch");
  if (w.curvature != curvature_)
    throw std::invalid_argument(
        "insert_support: curvature differs from table curvature");
  if (find_duplicate(w, tol))
    return false;
  supports_.push_back(std::move(w));
  return true;
}

MaxPlusValueTable
MaxPlusValueTable::subset(std::span<const std::size_t> indices) const {
  MaxPlusValueTable out(dim_, curvature_);
  std::vector<std::size_t> sorted(indices.begin(), indices.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (std::size_t j : sorted) {
    if (j >= supports_.size())
      throw std::out_of_range("MaxPlusValueTable::subset: bad index");
    out.supports_.push_back(supports_[j]);
  }
  return out;
}

MaxPlusEval eval_maxplus(const MaxPlusValueTable &table, const Vector &x) {
  return table.eval(x);
}

bool insert_support(MaxPlusValueTable &table, QuadraticSupport w, double tol) {
  return table.insert(std::move(w), tol);
}

PruneResult prune(const MaxPlusValueTable &table, const ProbeSet &probes,
                  std::span<const std::size_t> keep) {
  const std::size_t r = table.rank();
  std::vector<char> active(r, 0);
  for (std::size_t j : keep) {
    if (j >= r)
      throw std::out_of_range("prune: protected index out of range");
    active[j] = 1;
  }
  // Each worker marks into its own mask; masks are OR-merged afterwards.
  const std::size_t workers = parallel_workers(probes.size());
  std::vector<std::vector<char>> masks(workers, std::vector<char>(r, 0));
  parallel_for(probes.size(), [&](std::size_t begin, std::size_t end,
                                  std::size_t worker) {
    auto &mask = masks[worker];
    std::vector<double> local(r);
    for (std::size_t q = begin; q < end; ++q) {
      double best = kMinusInfinity;
      for (std::size_t j = 0; j < r; ++j) {
        local[j] = eval_support(table[j], probes.points[q]);
        best = std::max(best, local[j]);
      }
      for (std::size_t j = 0; j < r; ++j)
        if (local[j] == best)
          mask[j] = 1;
    }
  });
  PruneResult out;
  for (std::size_t j = 0; j < r; ++j) {
    bool on = active[j] != 0;
    for (const auto &mask : masks)
      on = on || mask[j] != 0;
    if (on)
      out.kept.push_back(j);
  }
  out.table = table.subset(out.kept);
  return out;
}

nlohmann::json vector_to_json(const Vector &v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    j.push_back(v[i]);
  return j;
}

Vector vector_from_json(const nlohmann::json &j) {
  if (!j.is_array())
    throw std::invalid_argument("expected a JSON array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

nlohmann::json support_to_json(const QuadraticSupport &w) {
  return {{"beta", w.beta},
          {"p", vector_to_json(w.slope)},
          {"a", vector_to_json(w.anchor)},
          {"c", w.curvature}};
}

QuadraticSupport support_from_json(const nlohmann::json &j) {
  QuadraticSupport w;
  w.beta = j.at("beta").get<double>();
  w.slope = vector_from_json(j.at("p"));
  w.anchor = vector_from_json(j.at("a"));
  w.curvature = j.at("c").get<double>();
  w.validate();
  return w;
}

nlohmann::json to_json(const MaxPlusValueTable &table) {
  nlohmann::json supports = nlohmann::json::array();
  for (const auto &w : table.supports())
    supports.push_back({{"beta", w.beta},
                        {"p", vector_to_json(w.slope)},
                        {"a", vector_to_json(w.anchor)}});
  return {{"dim", table.dim()},
          {"curvature", table.curvature()},
          {"supports", std::move(supports)}};
}

MaxPlusValueTable table_from_json(const nlohmann::json &j) {
  MaxPlusValueTable table(j.at("dim").get<std::size_t>(),
                          j.at("curvature").get<double>());
  for (const auto &s : j.at("supports")) {
    QuadraticSupport w;
    w.beta = s.at("beta").get<double>();
    w.slope = vector_from_json(s.at("p"));
    w.anchor = vector_from_json(s.at("a"));
    w.curvature = table.curvature();
    // Checkpoints are restored verbatim, duplicates included.
    if (!table.insert(w, -1.0))
      throw std::invalid_argument("table_from_json: rejected support");
  }
  return table;
}

} // namespace troptraj
