#pragma once

// Scenario model and the key-value configuration format.
//
//   # comments start with '#' or ';'
//   name = case_a
//
//   [vehicle]
//   m_dry   = 1500        # kg, required
//   m_fuel0 = 500         # kg, required
//   v_ex    = 2206.575    # m/s, required
//
//   [environment]
//   gravity = 0, 0, -3.721   # m/s^2, optional (this is the default)
//
//   [axes.x]              # likewise [axes.y] and [axes.z], all required
//   r0 = 1900             # m
//   v0 = -40              # m/s
//   rf = 0                # m
//   epsilon = 0.1         # m, optional
//
//   [options]             # every key optional
//   dt = 0.01
//   t_max = 1000          # unset means twice the termination time
//   fuel_model = gravity_compensated   # or command_only
//   log_stride = 10
//   stop = termination_time            # or all_settled
//   stop_on_depletion = true

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bpdg/error.hpp"
#include "bpdg/format.hpp"
#include "bpdg/guidance.hpp"
#include "json.hpp"

namespace bpdg {

using Vec3 = std::array<double, 3>;

inline constexpr std::array<const char*, 3> kAxisNames{"x", "y", "z"};

struct Vehicle {
  double m_dry = 0.0;
  double m_fuel0 = 0.0;
  double v_ex = 0.0;

  double m0() const { return m_dry + m_fuel0; }
  bool operator==(const Vehicle&) const = default;
};

struct Environment {
  Vec3 gravity{0.0, 0.0, -3.721};

  bool operator==(const Environment&) const = default;
};

enum class FuelModel { command_only, gravity_compensated };
enum class StopRule { termination_time, all_settled };

struct SimOptions {
  double dt = 0.01;
  std::optional<double> t_max;
  FuelModel fuel_model = FuelModel::gravity_compensated;
  int log_stride = 10;
  StopRule stop = StopRule::termination_time;
  bool stop_on_depletion = true;

  bool operator==(const SimOptions&) const = default;
};

struct Scenario {
  std::string name = "scenario";
  Vehicle vehicle;
  Environment environment;
  std::array<AxisBoundary, 3> axes{};
  SimOptions options;

  bool operator==(const Scenario&) const = default;
};

struct ScenarioDesign {
  std::array<AxisDesign, 3> axes;
  double T_s = 0.0;
};

inline const char* to_string(FuelModel m) {
  return m == FuelModel::command_only ? "command_only" : "gravity_compensated";
}

inline const char* to_string(StopRule s) {
  return s == StopRule::termination_time ? "termination_time" : "all_settled";
}

inline std::optional<FuelModel> parse_fuel_model(std::string_view s) {
  if (s == "command_only") return FuelModel::command_only;
  if (s == "gravity_compensated") return FuelModel::gravity_compensated;
  return std::nullopt;
}

inline std::optional<StopRule> parse_stop_rule(std::string_view s) {
  if (s == "termination_time") return StopRule::termination_time;
  if (s == "all_settled") return StopRule::all_settled;
  return std::nullopt;
}

/// Throws ValidationError naming the first violated field, or the axis
/// errors raised by canonicalization.
inline void validate(const Scenario& s) {
  auto positive = [](const std::string& field, double v) {
    if (!std::isfinite(v) || !(v > 0.0)) throw ValidationError(field, "must be a positive number");
  };
  positive("vehicle.m_dry", s.vehicle.m_dry);
  if (!std::isfinite(s.vehicle.m_fuel0) || s.vehicle.m_fuel0 < 0.0) {
    throw ValidationError("vehicle.m_fuel0", "must be non-negative");
  }
  positive("vehicle.v_ex", s.vehicle.v_ex);
  for (std::size_t i = 0; i < 3; ++i) {
    if (!std::isfinite(s.environment.gravity[i])) {
      throw ValidationError("environment.gravity", "components must be finite");
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string prefix = std::string("axes.") + kAxisNames[i];
    const AxisBoundary& ax = s.axes[i];
    if (!std::isfinite(ax.r0)) throw ValidationError(prefix + ".r0", "must be finite");
    if (!std::isfinite(ax.v0)) throw ValidationError(prefix + ".v0", "must be finite");
    if (!std::isfinite(ax.rf)) throw ValidationError(prefix + ".rf", "must be finite");
    positive(prefix + ".epsilon", ax.epsilon);
    const CanonicalAxis canon = canonicalize_axis(ax);
    const bool degenerate = canon.boundary.v0 == 0.0;
    if (!degenerate && !(ax.epsilon < canon.boundary.r0 - canon.boundary.rf)) {
      throw ValidationError(prefix + ".epsilon", "must be smaller than the distance to the target");
    }
  }
  positive("options.dt", s.options.dt);
  if (s.options.t_max) positive("options.t_max", *s.options.t_max);
  if (s.options.log_stride < 1) throw ValidationError("options.log_stride", "must be at least 1");
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline double to_number(const std::string& field, const std::string& text) {
  double v = 0.0;
  if (!parse_double(text, v)) throw ValidationError(field, "expected a number, got '" + text + "'");
  return v;
}

inline Vec3 to_vec3(const std::string& field, const std::string& text) {
  Vec3 out{};
  std::size_t n = 0;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (n == 3) throw ValidationError(field, "expected three comma-separated numbers");
    out[n++] = to_number(field, trim(part));
  }
  if (n != 3) throw ValidationError(field, "expected three comma-separated numbers");
  return out;
}

inline bool to_bool(const std::string& field, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ValidationError(field, "expected true or false");
}

using Section = std::map<std::string, std::string>;

}  // namespace detail

/// Parses and validates a scenario from config text.
inline Scenario load_scenario(std::string_view text) {
  std::map<std::string, detail::Section> sections;
  std::set<std::string> seen_sections{""};
  sections[""];
  std::string current;
  int line_no = 0;
  std::stringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find_first_of("#;");
    const std::string line = detail::trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ParseError(line_no, "malformed section header");
      current = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      if (!seen_sections.insert(current).second) throw ParseError(line_no, "duplicate section [" + current + "]");
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "missing key");
    if (!sections[current].emplace(key, value).second) throw ParseError(line_no, "duplicate key '" + key + "'");
  }

  static const std::map<std::string, std::set<std::string>> schema{
      {"", {"name"}},
      {"vehicle", {"m_dry", "m_fuel0", "v_ex"}},
      {"environment", {"gravity"}},
      {"axes.x", {"r0", "v0", "rf", "epsilon"}},
      {"axes.y", {"r0", "v0", "rf", "epsilon"}},
      {"axes.z", {"r0", "v0", "rf", "epsilon"}},
      {"options", {"dt", "t_max", "fuel_model", "log_stride", "stop", "stop_on_depletion"}},
  };
  for (const auto& [name, kv] : sections) {
    const auto known = schema.find(name);
    if (known == schema.end()) throw ValidationError(name, "unknown section");
    for (const auto& entry : kv) {
      if (!known->second.count(entry.first)) {
        throw ValidationError(name.empty() ? entry.first : name + "." + entry.first, "unknown key");
      }
    }
  }

  auto path = [](const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  };
  auto find = [&](const std::string& section, const std::string& key) -> const std::string* {
    const auto s = sections.find(section);
    if (s == sections.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  };
  auto required = [&](const std::string& section, const std::string& key) {
    const std::string* v = find(section, key);
    if (!v) throw ValidationError(path(section, key), "required field is missing");
    return detail::to_number(path(section, key), *v);
  };

  Scenario s;
  if (const auto* v = find("", "name")) s.name = *v;
  if (s.name.empty()) throw ValidationError("name", "must not be empty");
  s.vehicle.m_dry = required("vehicle", "m_dry");
  s.vehicle.m_fuel0 = required("vehicle", "m_fuel0");
  s.vehicle.v_ex = required("vehicle", "v_ex");
  if (const auto* v = find("environment", "gravity")) s.environment.gravity = detail::to_vec3("environment.gravity", *v);
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string sec = std::string("axes.") + kAxisNames[i];
    AxisBoundary& ax = s.axes[i];
    ax.r0 = required(sec, "r0");
    ax.v0 = required(sec, "v0");
    ax.rf = required(sec, "rf");
    if (const auto* v = find(sec, "epsilon")) ax.epsilon = detail::to_number(sec + ".epsilon", *v);
  }
  SimOptions& o = s.options;
  if (const auto* v = find("options", "dt")) o.dt = detail::to_number("options.dt", *v);
  if (const auto* v = find("options", "t_max")) o.t_max = detail::to_number("options.t_max", *v);
  if (const auto* v = find("options", "fuel_model")) {
    const auto m = parse_fuel_model(*v);
    if (!m) throw ValidationError("options.fuel_model", "expected command_only or gravity_compensated");
    o.fuel_model = *m;
  }
  if (const auto* v = find("options", "log_stride")) {
    const double stride = detail::to_number("options.log_stride", *v);
    if (stride != std::floor(stride) || stride < 1 || stride > 1e9) {
      throw ValidationError("options.log_stride", "must be a positive integer");
    }
    o.log_stride = static_cast<int>(stride);
  }
  if (const auto* v = find("options", "stop")) {
    const auto r = parse_stop_rule(*v);
    if (!r) throw ValidationError("options.stop", "expected termination_time or all_settled");
    o.stop = *r;
  }
  if (const auto* v = find("options", "stop_on_depletion")) o.stop_on_depletion = detail::to_bool("options.stop_on_depletion", *v);

  validate(s);
  return s;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return load_scenario(ss.str());
}

/// Writes a scenario back as config text; load_scenario reproduces it exactly.
inline std::string to_config(const Scenario& s) {
  std::ostringstream out;
  const auto num = format_double;
  out << "name = " << s.name << "\n\n";
  out << "[vehicle]\n"
      << "m_dry = " << num(s.vehicle.m_dry) << "\n"
      << "m_fuel0 = " << num(s.vehicle.m_fuel0) << "\n"
      << "v_ex = " << num(s.vehicle.v_ex) << "\n\n";
  const Vec3& g = s.environment.gravity;
  out << "[environment]\n"
      << "gravity = " << num(g[0]) << ", " << num(g[1]) << ", " << num(g[2]) << "\n\n";
  for (std::size_t i = 0; i < 3; ++i) {
    const AxisBoundary& ax = s.axes[i];
    out << "[axes." << kAxisNames[i] << "]\n"
        << "r0 = " << num(ax.r0) << "\n"
        << "v0 = " << num(ax.v0) << "\n"
        << "rf = " << num(ax.rf) << "\n"
        << "epsilon = " << num(ax.epsilon) << "\n\n";
  }
  const SimOptions& o = s.options;
  out << "[options]\n"
      << "dt = " << num(o.dt) << "\n";
  if (o.t_max) out << "t_max = " << num(*o.t_max) << "\n";
  out << "fuel_model = " << to_string(o.fuel_model) << "\n"
      << "log_stride = " << o.log_stride << "\n"
      << "stop = " << to_string(o.stop) << "\n"
      << "stop_on_depletion = " << (o.stop_on_depletion ? "true" : "false") << "\n";
  return out.str();
}

/// Designs every axis and the termination time.
inline ScenarioDesign design_scenario(const Scenario& s) {
  ScenarioDesign out;
  for (std::size_t i = 0; i < 3; ++i) out.axes[i] = design_axis(s.axes[i]);
  out.T_s = termination_time(out.axes);
  return out;
}

inline double effective_t_max(const Scenario& s, double T_s) {
  if (s.options.t_max) return *s.options.t_max;
  return std::max(2.0 * T_s, s.options.dt);
}

inline nlohmann::ordered_json to_json(const Scenario& s) {
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["vehicle"] = {{"m_dry", s.vehicle.m_dry}, {"m_fuel0", s.vehicle.m_fuel0}, {"v_ex", s.vehicle.v_ex}};
  j["environment"] = {{"gravity", s.environment.gravity}};
  nlohmann::ordered_json axes;
  for (std::size_t i = 0; i < 3; ++i) {
    const AxisBoundary& ax = s.axes[i];
    axes[kAxisNames[i]] = {{"r0", ax.r0}, {"v0", ax.v0}, {"rf", ax.rf}, {"epsilon", ax.epsilon}};
  }
  j["axes"] = axes;
  const SimOptions& o = s.options;
  j["options"] = {{"dt", o.dt},
                  {"t_max", o.t_max ? nlohmann::ordered_json(*o.t_max) : nlohmann::ordered_json(nullptr)},
                  {"fuel_model", to_string(o.fuel_model)},
                  {"log_stride", o.log_stride},
                  {"stop", to_string(o.stop)},
                  {"stop_on_depletion", o.stop_on_depletion}};
  return j;
}

inline nlohmann::ordered_json to_json(const AxisDesign& d) {
  return {{"a", d.params.a},
          {"b", d.params.b},
          {"c", d.params.c},
          {"P", d.P},
          {"K", d.K},
          {"Q", d.Q},
          {"re1", d.equilibria.unstable},
          {"re2", d.equilibria.stable},
          {"t_settle", d.t_settle},
          {"r_peak", d.r_peak},
          {"a_peak", d.a_peak},
          {"sign_flip", d.sign_flip},
          {"degenerate", d.degenerate}};
}

/// Design summary: per-axis parameters and derived quantities (canonical
/// frame, see sign_flip), the termination time, and the effective config.
inline nlohmann::ordered_json design_summary(const Scenario& s, const ScenarioDesign& d) {
  nlohmann::ordered_json j;
  j["scenario"] = s.name;
  nlohmann::ordered_json axes;
  for (std::size_t i = 0; i < 3; ++i) axes[kAxisNames[i]] = to_json(d.axes[i]);
  j["axes"] = axes;
  j["T_s"] = d.T_s;
  j["t_max"] = effective_t_max(s, d.T_s);
  j["config"] = to_json(s);
  return j;
}

}  // namespace bpdg
