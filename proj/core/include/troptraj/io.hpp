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


#ifndef TROPTRAJ_IO_HPP
#define TROPTRAJ_IO_HPP

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "troptraj/nbody.hpp"
#include "troptraj/oracles.hpp"
#include "troptraj/solver.hpp"

namespace troptraj {

/// Bumped whenever a CSV header or column meaning changes.
inline constexpr int kCsvSchemaVersion = 1;

inline constexpr std::string_view kValueCsvHeader =
    "iteration,v_at_x0,action_V_at_x0,wall_seconds";
inline constexpr std::string_view kRankCsvHeader =
    "iteration,min_rank,mean_rank,max_rank";
inline constexpr std::string_view kRadiiCsvHeader =
    "k,t,mean_radius,max_radius";
inline constexpr std::string_view kRiccatiCsvHeader = "k,t,s_k,gain_k";
inline constexpr std::string_view kRankTraceCsvHeader =
    "step,k,pre_dedup_rank,post_dedup_rank";
inline constexpr std::string_view kGridToleranceCsvHeader = "k,t,tolerance";

/// Shortest decimal that round-trips; "inf", "-inf", "nan" otherwise.
std::string format_number(double v);

/// k,t,x1_1..xN_d,u1_norm..uN_norm. The k = K row leaves the control
/// columns empty.
std::string trajectory_csv_header(const NBodyParams &p);

/// Each writer returns the header line and LF-terminated rows.
std::string value_csv(const RunHistory &history);
/// Min/mean/max over k = 0..K-1 (the terminal table is fixed).
std::string rank_csv(const RunHistory &history);
std::string trajectory_csv(const Trajectory &traj, const NBodyParams &p);
std::string radii_csv(const Trajectory &traj, const NBodyParams &p);
std::string riccati_csv(const RiccatiSolution &sol);
std::string rank_trace_csv(const DirectPropagation &dp);
std::string grid_tolerance_csv(const GridValue &grid, double h);
/// node,x1..xn,v_0..v_K
std::string grid_values_csv(const GridValue &grid);

/// Writes to a sibling temporary file and renames it over `path`.
void write_text_atomic(const std::filesystem::path &path,
                       std::string_view content);
void write_json_atomic(const std::filesystem::path &path,
                       const nlohmann::json &j, int indent = 1);
std::string read_text_file(const std::filesystem::path &path);
nlohmann::json read_json_file(const std::filesystem::path &path);

/// Library version, compiler, build type and dependency versions.
nlohmann::json build_info();

/// Strips the named column from every line of a CSV text.
std::string drop_csv_column(std::string_view csv, std::string_view column);

} // namespace troptraj

#endif // TROPTRAJ_IO_HPP
