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

#ifndef TROPTRAJ_MAXPLUS_HPP
#define TROPTRAJ_MAXPLUS_HPP

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace troptraj {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kMinusInfinity = -std::numeric_limits<double>::infinity();
inline constexpr double kDefaultDedupTolerance = 1e-9;

/**
 * Concave quadratic basis function
 *
 *   w(x) = beta + slope . (x - anchor) - (curvature / 2) |x - anchor|^2.
 *
 * The quadratic part is a sum of per-coordinate terms, so any block
 * partition of x (e.g. one block per particle) evaluates independently.
 */
struct QuadraticSupport {
  double beta = 0.0;
  Vector slope;
  Vector anchor;
  double curvature = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(anchor.size()); }

  /// Throws std::invalid_argument if an invariant is broken.
  void validate() const;
};

double eval_support(const QuadraticSupport &w, const Vector &x);
Vector grad_support(const QuadraticSupport &w, const Vector &x);

/// Evaluates only the coordinates [offset, offset + size) of the
/// quadratic part, without beta. Summing over a block partition and adding
/// beta reproduces eval_support up to accumulation order.
double eval_support_block(const QuadraticSupport &w, const Vector &x,
                          std::size_t offset, std::size_t size);

struct MaxPlusEval {
  double value = kMinusInfinity;
  std::optional<std::size_t> active;
};

/// True when (beta, slope, anchor) of both supports agree to relative
/// L-infinity deviation <= tol.
bool is_duplicate(const QuadraticSupport &lhs, const QuadraticSupport &rhs,
                  double tol);

enum class ProbeProvenance { trajectory, perturbation, uniform_box };

struct ProbeSet {
  std::vector<Vector> points;
  std::vector<ProbeProvenance> provenance;

  void add(Vector x, ProbeProvenance from) {
    points.push_back(std::move(x));
    provenance.push_back(from);
  }
  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// How probe points are drawn around a set of seed states.
struct ProbeSpec {
  bool include_seeds = true;
  std::size_t perturbations_per_seed = 8;
  double sigma = 0.5;
  std::size_t uniform_count = 0;
  Vector box_lower;
  Vector box_upper;
  std::size_t max_probes = 4096;
};

/// Seeds first, then Gaussian perturbations of the seeds (round robin),
/// then uniform samples in [box_lower, box_upper]; truncated to max_probes.
ProbeSet make_probes(std::span<const Vector> seeds, const ProbeSpec &spec,
                     std::mt19937_64 &rng);

/**
 * Pointwise maximum of concave quadratics sharing one curvature. An empty
 * table is the constant -infinity.
 */
class MaxPlusValueTable {
public:
  MaxPlusValueTable() = default;
  MaxPlusValueTable(std::size_t dim, double curvature);

  std::size_t dim() const { return dim_; }
  double curvature() const { return curvature_; }
  std::size_t rank() const { return supports_.size(); }
  bool empty() const { return supports_.empty(); }

  const std::vector<QuadraticSupport> &supports() const { return supports_; }
  const QuadraticSupport &operator[](std::size_t i) const {
    return supports_[i];
  }

  MaxPlusEval eval(const Vector &x) const;

  /// Appends w unless an existing member duplicates it under tol.
  bool insert(QuadraticSupport w, double tol = kDefaultDedupTolerance);

  /// Index of an existing duplicate of w, if any.
  std::optional<std::size_t> find_duplicate(const QuadraticSupport &w,
                                            double tol) const;

  /// Mutable access for fault-injection tests and checkpoint loading.
  QuadraticSupport &mutable_support(std::size_t i) { return supports_[i]; }

  /// Keeps the listed indices, in increasing order.
  MaxPlusValueTable subset(std::span<const std::size_t> indices) const;

private:
  std::size_t dim_ = 0;
  double curvature_ = 0.0;
  std::vector<QuadraticSupport> supports_;
};

MaxPlusEval eval_maxplus(const MaxPlusValueTable &table, const Vector &x);

bool insert_support(MaxPlusValueTable &table, QuadraticSupport w,
                    double tol = kDefaultDedupTolerance);

struct PruneResult {
  MaxPlusValueTable table;
  /// Indices of the input table that survived, increasing.
  std::vector<std::size_t> kept;
};

/// Keeps every support attaining the maximum (ties included) at some probe,
/// plus the protected indices.
PruneResult prune(const MaxPlusValueTable &table, const ProbeSet &probes,
                  std::span<const std::size_t> keep);

nlohmann::json support_to_json(const QuadraticSupport &w);
QuadraticSupport support_from_json(const nlohmann::json &j);

nlohmann::json to_json(const MaxPlusValueTable &table);
MaxPlusValueTable table_from_json(const nlohmann::json &j);

nlohmann::json vector_to_json(const Vector &v);
Vector vector_from_json(const nlohmann::json &j);

} // namespace troptraj

#endif // TROPTRAJ_MAXPLUS_HPP
