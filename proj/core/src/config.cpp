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


#include "troptraj/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <toml.hpp>

namespace troptraj {

namespace {

using nlohmann::json;

template <class E> struct EnumName {
  E value;
  std::string_view name;
};

constexpr EnumName<InitialStateKind> kInitialStateNames[] = {
    {InitialStateKind::circle, "circle"},
    {InitialStateKind::annulus, "annulus"},
    {InitialStateKind::explicit_state, "explicit"}};
constexpr EnumName<InitKind> kInitNames[] = {{InitKind::zero, "zero"},
                                             {InitKind::constant, "constant"},
                                             {InitKind::lqr, "lqr"}};
constexpr EnumName<BoundKind> kBoundNames[] = {
    {BoundKind::minus_infinity, "minus_infinity"},
    {BoundKind::constant, "constant"}};
constexpr EnumName<CurvatureMode> kCurvatureNames[] = {
    {CurvatureMode::analytic, "analytic"},
    {CurvatureMode::pairwise, "pairwise"},
    {CurvatureMode::sampled, "sampled"}};
constexpr EnumName<ScheduleKind> kScheduleNames[] = {
    {ScheduleKind::uniform, "uniform"},
    {ScheduleKind::control_aware, "control_aware"}};
constexpr EnumName<SweepFreshness> kFreshnessNames[] = {
    {SweepFreshness::fresh, "fresh"},
    {SweepFreshness::strict_previous, "strict_previous"}};

template <class E, std::size_t N>
std::string_view enum_name(const EnumName<E> (&table)[N], E v) {
  for (const auto &e : table)
    if (e.value == v)
      return e.name;
  return "?";
}

/// Reads fields of one JSON object and rejects the keys nobody asked for.
class ObjectReader {
public:
  ObjectReader(const json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object())
      throw ConfigError(where() + ": expected a table");
  }

  bool has(const char *key) const { return j_.contains(key); }

  const json *child(const char *key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string sub(const char *key) const {
    return path_.empty() ? std::string(key) : path_ + "." + key;
  }

  void get(const char *key, double &out) {
    if (const json *v = child(key)) {
      if (!v->is_number())
        throw ConfigError(sub(key) + ": expected a number");
      out = v->get<double>();
    }
  }

  void get(const char *key, std::size_t &out) {
    if (const json *v = child(key)) {
      if (v->is_number_unsigned())
        out = v->get<std::size_t>();
      else if (v->is_number_integer() && v->get<std::int64_t>() >= 0)
        out = static_cast<std::size_t>(v->get<std::int64_t>());
      else
        throw ConfigError(sub(key) + ": expected a non-negative integer");
    }
  }

  void get(const char *key, std::optional<std::uint64_t> &out) {
    if (child(key) == nullptr)
      return;
    std::size_t v = 0;
    get(key, v);
    out = v;
  }

  void get(const char *key, bool &out) {
    if (const json *v = child(key)) {
      if (!v->is_boolean())
        throw ConfigError(sub(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }

  void get(const char *key, std::string &out) {
    if (const json *v = child(key)) {
      if (!v->is_string())
        throw ConfigError(sub(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }

  void get(const char *key, std::vector<double> &out) {
    if (const json *v = child(key)) {
      if (!v->is_array())
        throw ConfigError(sub(key) + ": expected an array of numbers");
      out.clear();
      for (const auto &e : *v) {
        if (!e.is_number())
          throw ConfigError(sub(key) + ": expected an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }

  template <class E, std::size_t N>
  void get(const char *key, E &out, const EnumName<E> (&table)[N]) {
    if (const json *v = child(key)) {
      if (v->is_string())
        for (const auto &e : table)
          if (e.name == v->get<std::string>()) {
            out = e.value;
            return;
          }
      std::string names;
      for (const auto &e : table)
        names += (names.empty() ? "" : ", ") + std::string(e.name);
      throw ConfigError(sub(key) + ": expected one of " + names);
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key()))
        throw ConfigError("unknown key '" + sub(it.key().c_str()) + "'");
  }

private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  const json &j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

NBodyParams read_problem(ObjectReader &parent) {
  NBodyParams p;
  const json *j = parent.child("problem");
  if (j == nullptr)
    return p;
  ObjectReader r(*j, "problem");
  r.get("N", p.N);
  r.get("d", p.d);
  r.get("k_trap", p.k_trap);
  r.get("k_T", p.k_T);
  r.get("R_diag", p.R_diag);
  r.get("kappa", p.kappa);
  r.get("eps", p.eps);
  r.get("h", p.h);
  r.get("K", p.K);
  if (r.has("T"))
    r.get("T", p.T);
  else
    p.T = double(p.K) * p.h;
  r.finish();
  return p;
}

InitialStateSpec read_initial_state(ObjectReader &parent) {
  InitialStateSpec s;
  const json *j = parent.child("initial_state");
  if (j == nullptr)
    return s;
  ObjectReader r(*j, "initial_state");
  r.get("kind", s.kind, kInitialStateNames);
  r.get("radius", s.radius);
  r.get("r_min", s.r_min);
  r.get("r_max", s.r_max);
  r.get("seed", s.seed);
  r.get("state", s.state);
  r.finish();
  return s;
}

SolverSettings read_solver(ObjectReader &parent) {
  SolverSettings s;
  const json *j = parent.child("solver");
  if (j == nullptr)
    return s;
  ObjectReader r(*j, "solver");
  r.get("M", s.M);
  r.get("prune_every", s.prune_every);
  r.get("probe_perturbations", s.probe_perturbations);
  r.get("probe_sigma", s.probe_sigma);
  r.get("probe_uniform", s.probe_uniform);
  r.get("probe_box", s.probe_box);
  r.get("probe_max", s.probe_max);
  r.get("dedup_tol", s.dedup_tol);
  r.get("freshness", s.freshness, kFreshnessNames);
  r.get("init", s.init, kInitNames);
  r.get("init_control", s.init_control);
  r.get("bound", s.bound, kBoundNames);
  r.get("bound_value", s.bound_value);
  r.get("curvature", s.curvature, kCurvatureNames);
  r.get("schedule", s.schedule, kScheduleNames);
  r.get("sampled_count", s.sampled_count);
  r.get("sampled_box", s.sampled_box);
  r.get("sampled_safety", s.sampled_safety);
  r.get("early_stop", s.early_stop);
  r.get("audit_samples", s.audit_samples);
  r.get("subsolution_samples", s.subsolution_samples);
  r.finish();
  return s;
}

OutputSettings read_outputs(ObjectReader &parent) {
  OutputSettings s;
  const json *j = parent.child("outputs");
  if (j == nullptr)
    return s;
  ObjectReader r(*j, "outputs");
  r.get("directory", s.directory);
  r.get("trajectory", s.trajectory);
  r.get("radii", s.radii);
  r.get("checkpoint", s.checkpoint);
  r.finish();
  return s;
}

json toml_to_json(const toml::node &node) {
  if (const auto *t = node.as_table()) {
    json out = json::object();
    for (const auto &[k, v] : *t)
      out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto *a = node.as_array()) {
    json out = json::array();
    for (const auto &v : *a)
      out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto *v = node.as_integer())
    return v->get();
  if (const auto *v = node.as_floating_point())
    return v->get();
  if (const auto *v = node.as_boolean())
    return v->get();
  if (const auto *v = node.as_string())
    return v->get();
  throw ConfigError("dates and times are not valid config values");
}

} // namespace

std::string_view to_string(InitialStateKind v) {
  return enum_name(kInitialStateNames, v);
}
std::string_view to_string(InitKind v) { return enum_name(kInitNames, v); }
std::string_view to_string(BoundKind v) { return enum_name(kBoundNames, v); }
std::string_view to_string(CurvatureMode v) {
  return enum_name(kCurvatureNames, v);
}
std::string_view to_string(ScheduleKind v) {
  return enum_name(kScheduleNames, v);
}
std::string_view to_string(SweepFreshness v) {
  return enum_name(kFreshnessNames, v);
}

void RunConfig::validate() const {
  try {
    problem.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
  const auto &is = initial_state;
  switch (is.kind) {
  case InitialStateKind::circle:
    if (problem.d < 2 || !(is.radius >= 0.0))
      throw ConfigError("initial_state: circle needs d >= 2 and radius >= 0");
    break;
  case InitialStateKind::annulus:
    if (problem.d < 2 || !(0.0 <= is.r_min && is.r_min <= is.r_max))
      throw ConfigError(
          "initial_state: annulus needs d >= 2 and 0 <= r_min <= r_max");
    break;
  case InitialStateKind::explicit_state:
    if (is.state.size() != problem.state_dim())
      throw ConfigError("initial_state.state: expected " +
                        std::to_string(problem.state_dim()) + " numbers, got " +
                        std::to_string(is.state.size()));
    if (!std::all_of(is.state.begin(), is.state.end(),
                     [](double v) { return std::isfinite(v); }))
      throw ConfigError("initial_state.state: values must be finite");
    break;
  }
  const auto &s = solver;
  if (s.M == 0)
    throw ConfigError("solver.M: must be >= 1");
  if (!(s.probe_sigma >= 0.0) || !(s.probe_box >= 0.0))
    throw ConfigError("solver: probe_sigma and probe_box must be >= 0");
  if (s.probe_max == 0)
    throw ConfigError("solver.probe_max: must be >= 1");
  if (!(s.dedup_tol >= 0.0))
    throw ConfigError("solver.dedup_tol: must be >= 0");
  if (!std::isfinite(s.init_control) || !std::isfinite(s.bound_value))
    throw ConfigError("solver: init_control and bound_value must be finite");
  if (s.curvature == CurvatureMode::sampled &&
      (s.sampled_count == 0 || !(s.sampled_box > 0.0) ||
       !(s.sampled_safety >= 1.0)))
    throw ConfigError("solver: sampled curvature needs count >= 1, box > 0, "
                      "safety >= 1");
  if (outputs.directory.empty())
    throw ConfigError("outputs.directory: must not be empty");
}

nlohmann::json to_json(const RunConfig &c) {
  json j;
  const auto &p = c.problem;
  j["problem"] = {{"N", p.N},           {"d", p.d},     {"k_trap", p.k_trap},
                  {"k_T", p.k_T},       {"R_diag", p.R_diag},
                  {"kappa", p.kappa},   {"eps", p.eps}, {"T", p.T},
                  {"h", p.h},           {"K", p.K}};
  const auto &is = c.initial_state;
  j["initial_state"] = {{"kind", to_string(is.kind)},
                        {"radius", is.radius},
                        {"r_min", is.r_min},
                        {"r_max", is.r_max},
                        {"state", is.state}};
  if (is.seed)
    j["initial_state"]["seed"] = *is.seed;
  const auto &s = c.solver;
  j["solver"] = {{"M", s.M},
                 {"prune_every", s.prune_every},
                 {"probe_perturbations", s.probe_perturbations},
                 {"probe_sigma", s.probe_sigma},
                 {"probe_uniform", s.probe_uniform},
                 {"probe_box", s.probe_box},
                 {"probe_max", s.probe_max},
                 {"dedup_tol", s.dedup_tol},
                 {"freshness", to_string(s.freshness)},
                 {"init", to_string(s.init)},
                 {"init_control", s.init_control},
                 {"bound", to_string(s.bound)},
                 {"bound_value", s.bound_value},
                 {"curvature", to_string(s.curvature)},
                 {"schedule", to_string(s.schedule)},
                 {"sampled_count", s.sampled_count},
                 {"sampled_box", s.sampled_box},
                 {"sampled_safety", s.sampled_safety},
                 {"early_stop", s.early_stop},
                 {"audit_samples", s.audit_samples},
                 {"subsolution_samples", s.subsolution_samples}};
  const auto &o = c.outputs;
  j["outputs"] = {{"directory", o.directory},
                  {"trajectory", o.trajectory},
                  {"radii", o.radii},
                  {"checkpoint", o.checkpoint}};
  j["seed"] = c.seed;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json &j) {
  ObjectReader root(j, "");
  RunConfig c;
  c.problem = read_problem(root);
  c.initial_state = read_initial_state(root);
  c.solver = read_solver(root);
  c.outputs = read_outputs(root);
  std::optional<std::uint64_t> seed;
  root.get("seed", seed);
  c.seed = seed.value_or(0);
  root.finish();
  c.validate();
  return c;
}

nlohmann::json parse_config_text(std::string_view text, ConfigFormat format) {
  if (format == ConfigFormat::json) {
    try {
      return json::parse(text);
    } catch (const json::parse_error &e) {
      throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
  }
  try {
    const toml::table table = toml::parse(text);
    return toml_to_json(table);
  } catch (const toml::parse_error &e) {
    std::ostringstream msg;
    msg << "invalid TOML at line " << e.source().begin.line << ": "
        << e.description();
    throw ConfigError(msg.str());
  }
}

ConfigFormat config_format_for(const std::filesystem::path &path) {
  return path.extension() == ".json" ? ConfigFormat::json : ConfigFormat::toml;
}

void apply_override(nlohmann::json &doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override '" + std::string(assignment) +
                      "': expected key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));

  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error &) {
    value = text;
  }

  json *node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty())
      throw ConfigError("override '" + key + "': empty path component");
    if (!node->is_object())
      throw ConfigError("override '" + key + "': '" + part +
                        "' is not inside a table");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null())
      *node = json::object();
    start = dot + 1;
  }
}

LoadedConfig load_run_config(const std::filesystem::path &path,
                             std::span<const std::string> overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();

  LoadedConfig loaded;
  loaded.source_text = buf.str();
  loaded.format = config_format_for(path);
  json doc = parse_config_text(loaded.source_text, loaded.format);
  for (const auto &o : overrides) {
    apply_override(doc, o);
    loaded.overrides.push_back(o);
  }
  loaded.config = run_config_from_json(doc);
  return loaded;
}

} // namespace troptraj
