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


#include "troptraj/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <fmt/format.h>

#ifndef TROPTRAJ_VERSION
#define TROPTRAJ_VERSION "unknown"
#endif
#ifndef TROPTRAJ_BUILD_TYPE
#define TROPTRAJ_BUILD_TYPE "unknown"
#endif

namespace troptraj {

namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

namespace {

std::string with_header(std::string_view header, const std::string &rows) {
  std::string out(header);
  out += '\n';
  out += rows;
  return out;
}

} // namespace

std::string trajectory_csv_header(const NBodyParams &p) {
  std::string h = "k,t";
  for (std::size_t i = 1; i <= p.N; ++i)
    for (std::size_t j = 1; j <= p.d; ++j)
      h += fmt::format(",x{}_{}", i, j);
  for (std::size_t i = 1; i <= p.N; ++i)
    h += fmt::format(",u{}_norm", i);
  return h;
}

std::string value_csv(const RunHistory &history) {
  std::string rows;
  for (const auto &r : history.records)
    rows += fmt::format("{},{},{},{}\n", r.iteration,
                        format_number(r.value_at_x0),
                        format_number(r.action_at_x0),
                        format_number(r.wall_seconds));
  return with_header(kValueCsvHeader, rows);
}

std::string rank_csv(const RunHistory &history) {
  std::string rows;
  for (const auto &r : history.records) {
    if (r.ranks.size() < 2)
      throw std::invalid_argument("rank_csv: record without ranks");
    const auto first = r.ranks.begin();
    const auto last = r.ranks.end() - 1;
    std::size_t sum = 0;
    for (auto it = first; it != last; ++it)
      sum += *it;
    rows += fmt::format("{},{},{},{}\n", r.iteration,
                        *std::min_element(first, last),
                        format_number(double(sum) / double(last - first)),
                        *std::max_element(first, last));
  }
  return with_header(kRankCsvHeader, rows);
}

std::string trajectory_csv(const Trajectory &traj, const NBodyParams &p) {
  const auto d = static_cast<Eigen::Index>(p.d);
  std::string rows;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const Vector &x = traj.states[k];
    if (x.size() != Eigen::Index(p.state_dim()))
      throw std::invalid_argument("trajectory_csv: state dimension");
    rows += fmt::format("{},{}", k, format_number(double(k) * p.h));
    for (Eigen::Index i = 0; i < x.size(); ++i)
      rows += "," + format_number(x[i]);
    for (std::size_t i = 0; i < p.N; ++i) {
      rows += ',';
      if (k < traj.controls.size())
        rows += format_number(
            traj.controls[k].segment(Eigen::Index(i) * d, d).norm());
    }
    rows += '\n';
  }
  return with_header(trajectory_csv_header(p), rows);
}

std::string radii_csv(const Trajectory &traj, const NBodyParams &p) {
  const RadiiDiagnostics rd = radii_diagnostics(traj, p);
  std::string rows;
  for (std::size_t k = 0; k < rd.mean_radius.size(); ++k)
    rows += fmt::format("{},{},{},{}\n", k, format_number(double(k) * p.h),
                        format_number(rd.mean_radius[k]),
                        format_number(rd.max_radius[k]));
  return with_header(kRadiiCsvHeader, rows);
}

std::string riccati_csv(const RiccatiSolution &sol) {
  std::string rows;
  for (std::size_t k = 0; k < sol.gain.size(); ++k)
    rows += fmt::format("{},{},{},{}\n", k, format_number(double(k) * sol.h),
                        format_number(sol.s[k]), format_number(sol.gain[k]));
  return with_header(kRiccatiCsvHeader, rows);
}

std::string rank_trace_csv(const DirectPropagation &dp) {
  const std::size_t K = dp.terms.size() - 1;
  std::string rows;
  for (std::size_t j = 0; j < dp.rank_trace.size(); ++j)
    rows += fmt::format("{},{},{},{}\n", j, K - j, dp.rank_trace[j],
                        dp.terms[K - j].size());
  return with_header(kRankTraceCsvHeader, rows);
}

std::string grid_tolerance_csv(const GridValue &grid, double h) {
  std::string rows;
  for (std::size_t k = 0; k < grid.tolerance.size(); ++k)
    rows += fmt::format("{},{},{}\n", k, format_number(double(k) * h),
                        format_number(grid.tolerance[k]));
  return with_header(kGridToleranceCsvHeader, rows);
}

std::string grid_values_csv(const GridValue &grid) {
  std::string header = "node";
  for (std::size_t i = 1; i <= grid.state_axes.size(); ++i)
    header += fmt::format(",x{}", i);
  for (std::size_t k = 0; k < grid.values.size(); ++k)
    header += fmt::format(",v_{}", k);
  std::string rows;
  for (std::size_t f = 0; f < grid.node_count(); ++f) {
    rows += fmt::format("{}", f);
    const Vector x = grid.node(f);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      rows += "," + format_number(x[i]);
    for (const auto &v : grid.values)
      rows += "," + format_number(v[f]);
    rows += '\n';
  }
  return with_header(header, rows);
}

void write_text_atomic(const fs::path &path, std::string_view content) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), std::streamsize(content.size()));
    out.flush();
    if (!out)
      throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_json_atomic(const fs::path &path, const nlohmann::json &j,
                       int indent) {
  write_text_atomic(path, j.dump(indent) + "\n");
}

std::string read_text_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json read_json_file(const fs::path &path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error &e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

nlohmann::json build_info() {
  return {
      {"troptraj_version", TROPTRAJ_VERSION},
      {"build_type", TROPTRAJ_BUILD_TYPE},
#if defined(__clang__)
      {"compiler", fmt::format("clang {}", __clang_version__)},
#elif defined(__GNUC__)
      {"compiler", fmt::format("gcc {}", __VERSION__)},
#else
      {"compiler", "unknown"},
#endif
      {"cxx_standard", __cplusplus},
      {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                            EIGEN_MINOR_VERSION)},
      {"nlohmann_json",
       fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR,
                   NLOHMANN_JSON_VERSION_MINOR, NLOHMANN_JSON_VERSION_PATCH)},
      {"fmt", FMT_VERSION},
  };
}

std::string drop_csv_column(std::string_view csv, std::string_view column) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < csv.size()) {
    const auto nl = csv.find('\n', start);
    const auto end = nl == std::string_view::npos ? csv.size() : nl;
    lines.push_back(csv.substr(start, end - start));
    start = end + 1;
  }
  if (lines.empty())
    return {};
  const auto split = [](std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t s = 0;
    while (true) {
      const auto c = line.find(',', s);
      cells.push_back(line.substr(s, c == std::string_view::npos ? c : c - s));
      if (c == std::string_view::npos)
        break;
      s = c + 1;
    }
    return cells;
  };
  const auto header = split(lines.front());
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end())
    throw std::invalid_argument("drop_csv_column: no column " +
                                std::string(column));
  const auto drop = std::size_t(it - header.begin());
  std::string out;
  for (const auto line : lines) {
    const auto cells = split(line);
    bool first = true;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i == drop)
        continue;
      if (!first)
        out += ',';
      out += cells[i];
      first = false;
    }
    out += '\n';
  }
  return out;
}

} // namespace troptraj
