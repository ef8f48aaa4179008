#pragma once

// Bifurcation diagrams, closed-form vs numeric verification, and sweeps
// over several scenarios.

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bpdg/format.hpp"
#include "bpdg/guidance.hpp"
#include "bpdg/scenario.hpp"
#include "bpdg/simulator.hpp"
#include "json.hpp"

namespace bpdg {

// ---------------------------------------------------------------------------
// Bifurcation diagrams

enum class Stability { stable, unstable };

inline const char* to_string(Stability s) { return s == Stability::stable ? "stable" : "unstable"; }

struct BifurcationSample {
  double a = 0.0;
  double r_eq = 0.0;
  Stability stability = Stability::stable;
};

struct BifurcationBranch {
  double b = 0.0;
  double c = 0.0;
  std::vector<BifurcationSample> samples;
};

struct BifurcationDiagram {
  BifurcationBranch stable;
  BifurcationBranch unstable;
};

/// Samples both equilibrium branches over a uniform grid in a. Grid points
/// where a^2/4 < c/b have no equilibria and are skipped.
inline BifurcationDiagram bifurcation_sweep(double a_min, double a_max, int n, double b, double c) {
  if (n < 2) throw DomainError("bifurcation sweep needs at least two samples");
  if (!(b > 0.0)) throw DomainError("bifurcation sweep needs b > 0");
  BifurcationDiagram out;
  out.stable.b = out.unstable.b = b;
  out.stable.c = out.unstable.c = c;
  for (int k = 0; k < n; ++k) {
    const double a = a_min + (a_max - a_min) * static_cast<double>(k) / static_cast<double>(n - 1);
    const AxisParams p{a, b, c};
    const auto eq = equilibria(p);
    if (!eq) continue;
    // Labels follow the slope sign; at the merge point the slope is zero
    // and each branch keeps its role.
    auto label = [&](Equilibrium which, Stability fallback) {
      const double slope = stability_slope(p, which);
      if (slope < 0.0) return Stability::stable;
      if (slope > 0.0) return Stability::unstable;
      return fallback;
    };
    out.stable.samples.push_back({a, eq->stable, label(Equilibrium::stable, Stability::stable)});
    out.unstable.samples.push_back({a, eq->unstable, label(Equilibrium::unstable, Stability::unstable)});
  }
  return out;
}

inline void write_bifurcation_csv(std::ostream& os, const BifurcationBranch& branch) {
  os << "a,r_eq,stability\n";
  for (const auto& s : branch.samples) {
    os << format_double(s.a) << ',' << format_double(s.r_eq) << ',' << to_string(s.stability) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Verification

struct VerifyCheck {
  std::string name;
  std::string axis;  // "x", "y", "z", or empty for whole-scenario checks
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
};

struct ConvergenceStudy {
  std::vector<double> dt;
  std::vector<double> max_error;  // max over steps and axes of |r - r_closed_form|
  std::vector<double> ratios;     // max_error[k] / max_error[k + 1]
};

struct VerifyReport {
  std::string scenario;
  std::vector<VerifyCheck> checks;
  ConvergenceStudy convergence;
  double fine_pair_ratio = 0.0;  // same ratio at the run step, informational
  std::optional<SimResult> result;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed; });
  }
  const VerifyCheck* find(std::string_view name, std::string_view axis = {}) const {
    for (const auto& c : checks) {
      if (c.name == name && c.axis == axis) return &c;
    }
    return nullptr;
  }
};

struct VerifyOptions {
  // Coarsest step of the step-halving ladder. At the default run step the
  // disagreement is already at the rounding floor, so the order is measured
  // where truncation error dominates.
  double convergence_dt = 0.5;
  int convergence_levels = 3;
};

/// Max deviation from the closed form over every logged record, per axis.
inline Vec3 closed_form_deviation(const TrajectoryLog& log, const ScenarioDesign& d) {
  Vec3 dev{};
  for (const auto& rec : log.records) {
    for (std::size_t i = 0; i < 3; ++i) {
      dev[i] = std::max(dev[i], std::abs(rec.r[i] - physical_position(d.axes[i], rec.t)));
    }
  }
  return dev;
}

inline double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  double sum = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k) sum += 0.5 * (y[k] + y[k - 1]) * (t[k] - t[k - 1]);
  return sum;
}

/// Step-halving experiment on the kinematics: each level halves dt and
/// records the worst closed-form disagreement over every step.
inline ConvergenceStudy convergence_study(Scenario s, const ScenarioDesign& d, double dt0, int levels) {
  ConvergenceStudy out;
  s.options.log_stride = 1;
  s.options.stop_on_depletion = false;
  double dt = dt0;
  for (int k = 0; k < levels; ++k, dt /= 2) {
    s.options.dt = dt;
    const RunOutput r = run(s, d);
    const Vec3 dev = closed_form_deviation(r.log, d);
    out.dt.push_back(dt);
    out.max_error.push_back(std::max({dev[0], dev[1], dev[2]}));
  }
  for (std::size_t k = 0; k + 1 < out.max_error.size(); ++k) {
    out.ratios.push_back(out.max_error[k] / out.max_error[k + 1]);
  }
  return out;
}

namespace detail {

inline double cubic_term_scale(double r, const AxisParams& p) {
  const double a = p.a, b = p.b, c = p.c;
  return std::abs(2 * b * b * r * r * r) + std::abs(3 * a * b * b * r * r) +
         std::abs((a * a * b * b + 2 * b * c) * r) + std::abs(a * b * c);
}

}  // namespace detail

/// Closed-form checks on one designed axis (canonical frame). The design is
/// taken as given, so perturbed parameters show up as failures.
inline std::vector<VerifyCheck> verify_axis(const AxisDesign& d, const std::string& axis) {
  std::vector<VerifyCheck> checks;
  auto add = [&](std::string name, double measured, double tol, bool strict_less = false) {
    const bool ok = std::isfinite(measured) && (strict_less ? measured < tol : measured <= tol);
    checks.push_back({std::move(name), axis, ok, measured, tol});
  };
  const AxisBoundary& bc = d.boundary;
  const AxisParams& p = d.params;
  if (d.degenerate) {
    add("degenerate_zero_command", std::abs(accel_command(bc.r0, p)), 0.0);
    return checks;
  }
  const double span = bc.r0 - bc.rf;

  const auto eq = equilibria(p);
  const double scale = std::max({1.0, std::abs(bc.r0), std::abs(bc.rf)});
  add("equilibrium_roundtrip", eq ? std::abs(eq->stable - bc.rf) / scale : INFINITY, 1e-9);

  double K = INFINITY;
  try {
    K = integration_constant(p, bc.r0);
  } catch (const Error&) {
  }
  add("k_vanishing", std::abs(K), 1e-12, true);

  add("extremum_value", std::abs(velocity_at(bc.r0, p) - bc.v0) / std::abs(bc.v0), 1e-12);
  const double h = 1e-4 * std::max(std::abs(bc.r0), 1.0);
  add("extremum_slope", std::abs((velocity_at(bc.r0 + h, p) - velocity_at(bc.r0 - h, p)) / (2 * h)), 1e-5);

  double stable_slope = NAN, unstable_slope = NAN;
  try {
    stable_slope = stability_slope(p, Equilibrium::stable);
    unstable_slope = stability_slope(p, Equilibrium::unstable);
  } catch (const Error&) {
  }
  checks.push_back({"stability_signs", axis, unstable_slope > 0.0 && stable_slope < 0.0, stable_slope, 0.0});

  // Everything below follows the closed-form trajectory, which needs P > 0.
  if (!(derived_P(p) > 0.0) || !std::isfinite(K)) {
    checks.push_back({"closed_form_available", axis, false, derived_P(p), 0.0});
    return checks;
  }
  const double ts = d.t_settle;

  double worst = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double t = ts * k / 100.0;
    const double dh = 1e-3;
    const double fd = (velocity_at(closed_form_position(t + dh, p, bc.r0), p) -
                       velocity_at(closed_form_position(t - dh, p, bc.r0), p)) / (2 * dh);
    const double cmd = accel_command(closed_form_position(t, p, bc.r0), p);
    worst = std::max(worst, std::abs(fd - cmd) / std::abs(cmd));
  }
  add("chain_rule", worst, 1e-4);

  worst = 0.0;
  double sampled_max = -INFINITY;
  for (int k = 0; k < 10000; ++k) {
    const double r = bc.rf + span * k / 9999.0;
    const double fac = accel_command(r, p);
    const double exp = accel_command_expanded(r, p);
    worst = std::max(worst, std::abs(fac - exp) / detail::cubic_term_scale(r, p));
    sampled_max = std::max(sampled_max, fac);
  }
  add("expanded_vs_factored", worst, 1e-10);
  add("peak_consistency", std::abs(sampled_max - d.a_peak) / std::abs(d.a_peak), 1e-6);
  add("peak_in_interval", (d.r_peak >= bc.rf && d.r_peak <= bc.r0) ? 0.0 : 1.0, 0.0);

  add("settling_inversion", std::abs(closed_form_position(ts, p, bc.r0) - bc.rf - bc.epsilon) / bc.epsilon, 1e-6,
      true);
  return checks;
}

/// Runs every closed-form check on the design, flies it, and compares the
/// flight against the closed-form predictions.
inline VerifyReport verify_closed_form(const Scenario& s, const ScenarioDesign& d, const VerifyOptions& vo = {}) {
  VerifyReport rep;
  rep.scenario = s.name;
  for (std::size_t i = 0; i < 3; ++i) {
    auto axis_checks = verify_axis(d.axes[i], kAxisNames[i]);
    rep.checks.insert(rep.checks.end(), axis_checks.begin(), axis_checks.end());
  }
  auto add = [&](std::string name, std::string axis, double measured, double tol) {
    rep.checks.push_back({std::move(name), std::move(axis), std::isfinite(measured) && measured <= tol, measured, tol});
  };

  const RunOutput out = run(s, d);
  const SimResult& res = out.result;
  rep.result = res;
  const bool completed = res.terminated_by == Termination::termination_time ||
                         res.terminated_by == Termination::all_settled;
  add("run_completed", "", completed ? 0.0 : 1.0, 0.0);

  const Vec3 dev = closed_form_deviation(out.log, d);
  const auto& recs = out.log.records;
  std::vector<double> t, thrust_acc;
  for (const auto& rec : recs) {
    t.push_back(rec.t);
    thrust_acc.push_back(norm(rec.a_thrust));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string ax = kAxisNames[i];
    const AxisDesign& ad = d.axes[i];
    add("targeting", ax, res.final_error[i], s.axes[i].epsilon);
    add("closed_form_agreement", ax, dev[i], 1e-3);
    if (!ad.degenerate) {
      const double observed = res.observed_settle[i].value_or(INFINITY);
      add("settle_time_agreement", ax, std::abs(observed - ad.t_settle) / ad.t_settle, 1e-2);
      add("peak_agreement", ax, std::abs(res.observed_peak_cmd[i] - ad.a_peak), 1e-3);
    }
    std::vector<double> cmd;
    for (const auto& rec : recs) cmd.push_back(std::abs(rec.a_cmd[i]));
    const double dv = trapezoid(t, cmd);
    const double v0 = std::abs(s.axes[i].v0);
    add("velocity_change_identity", ax, v0 > 0.0 ? std::abs(dv - v0) / v0 : dv, v0 > 0.0 ? 1e-3 : 1e-12);
  }

  // Rocket equation, checked at every logged time.
  double worst = 0.0;
  bool monotone = true;
  const double m0 = s.vehicle.m0();
  double impulse = 0.0;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    if (k > 0) impulse += 0.5 * (thrust_acc[k] + thrust_acc[k - 1]) * (t[k] - t[k - 1]);
    const double burned = s.vehicle.v_ex * std::log(m0 / recs[k].m);
    if (impulse > 0.0) worst = std::max(worst, std::abs(burned - impulse) / impulse);
    else worst = std::max(worst, std::abs(burned));
    if (k > 0) {
      const double drop = recs[k - 1].m - recs[k].m;
      const double expected = recs[k - 1].m * thrust_acc[k - 1] * (t[k] - t[k - 1]) / s.vehicle.v_ex;
      if (drop < 0.0 || (drop == 0.0 && expected > 1e-12 * recs[k - 1].m)) monotone = false;
    }
  }
  add("rocket_equation_identity", "", worst, 1e-3);
  add("mass_non_increasing", "", monotone ? 0.0 : 1.0, 0.0);
  add("fuel_within_load", "", std::max(0.0, res.fuel_used - s.vehicle.m_fuel0), s.options.stop_on_depletion ? 0.0 : INFINITY);

  rep.convergence = convergence_study(s, d, vo.convergence_dt, vo.convergence_levels);
  double min_ratio = INFINITY;
  for (double r : rep.convergence.ratios) min_ratio = std::min(min_ratio, r);
  rep.checks.push_back({"step_halving_order", "", min_ratio >= 8.0, min_ratio, 8.0});
  const ConvergenceStudy fine = convergence_study(s, d, s.options.dt, 2);
  rep.fine_pair_ratio = fine.ratios.empty() ? 0.0 : fine.ratios.front();
  return rep;
}

inline VerifyReport verify_closed_form(const Scenario& s, const VerifyOptions& vo = {}) {
  return verify_closed_form(s, design_scenario(s), vo);
}

inline nlohmann::ordered_json to_json(const VerifyReport& rep) {
  nlohmann::ordered_json j;
  j["scenario"] = rep.scenario;
  j["all_passed"] = rep.all_passed();
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : rep.checks) {
    // Non-finite residuals have no JSON representation; they are failures.
    const auto num = [](double x) { return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr); };
    checks.push_back({{"name", c.name}, {"axis", c.axis}, {"passed", c.passed}, {"measured", num(c.measured)},
                      {"tolerance", num(c.tolerance)}});
  }
  j["checks"] = checks;
  j["convergence"] = {{"dt", rep.convergence.dt},
                      {"max_error", rep.convergence.max_error},
                      {"ratios", rep.convergence.ratios},
                      {"fine_pair_ratio", rep.fine_pair_ratio}};
  if (rep.result) j["result"] = to_json(*rep.result);
  return j;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepCase {
  std::size_t index = 0;
  std::string name;
  Scenario scenario;
  std::optional<ScenarioDesign> design;
  std::optional<SimResult> result;
  std::string error;  // non-empty when the case failed
};

struct SweepReport {
  std::vector<SweepCase> cases;
};

/// Designs and flies every scenario. Cases run concurrently and are
/// reported in input order; a failing case records its error and the
/// others proceed.
inline SweepReport sweep(std::span<const Scenario> scenarios) {
  std::vector<std::future<SweepCase>> jobs;
  jobs.reserve(scenarios.size());
  for (std::size_t k = 0; k < scenarios.size(); ++k) {
    jobs.push_back(std::async(std::launch::async, [k, &s = scenarios[k]] {
      SweepCase c;
      c.index = k;
      c.name = s.name;
      c.scenario = s;
      try {
        c.design = design_scenario(s);
        c.result = run(s, *c.design).result;
      } catch (const std::exception& e) {
        c.error = e.what();
      }
      return c;
    }));
  }
  SweepReport rep;
  for (auto& j : jobs) rep.cases.push_back(j.get());
  return rep;
}

inline nlohmann::ordered_json to_json(const SweepReport& rep) {
  nlohmann::ordered_json cases = nlohmann::ordered_json::array();
  for (const auto& c : rep.cases) {
    nlohmann::ordered_json j;
    j["index"] = c.index;
    j["name"] = c.name;
    if (c.design) {
      nlohmann::ordered_json axes;
      for (std::size_t i = 0; i < 3; ++i) axes[kAxisNames[i]] = to_json(c.design->axes[i]);
      j["axes"] = axes;
      j["T_s"] = c.design->T_s;
    }
    if (c.result) j["result"] = to_json(*c.result);
    if (!c.error.empty()) j["error"] = c.error;
    j["config"] = to_json(c.scenario);
    cases.push_back(j);
  }
  return {{"cases", cases}};
}

inline constexpr const char* kSweepCsvHeader =
    "case,name,x0,y0,z0,a_x,a_y,a_z,b_x,b_y,b_z,c_x,c_y,c_z,t_xs,t_ys,t_zs,T_s,fuel_used,terminated_by,error";

/// One row per case, laid out like the parameter tables of the method.
inline void write_sweep_csv(std::ostream& os, const SweepReport& rep) {
  os << kSweepCsvHeader << '\n';
  for (const auto& c : rep.cases) {
    os << c.index << ',' << c.name;
    for (const auto& ax : c.scenario.axes) os << ',' << format_double(ax.r0);
    if (c.design) {
      const auto& d = *c.design;
      for (const auto& ad : d.axes) os << ',' << format_double(ad.params.a);
      for (const auto& ad : d.axes) os << ',' << format_double(ad.params.b);
      for (const auto& ad : d.axes) os << ',' << format_double(ad.params.c);
      for (const auto& ad : d.axes) os << ',' << format_double(ad.t_settle);
      os << ',' << format_double(d.T_s);
    } else {
      os << ",,,,,,,,,,,,,";
    }
    if (c.result) os << ',' << format_double(c.result->fuel_used) << ',' << to_string(c.result->terminated_by);
    else os << ",,";
    std::string err = c.error;
    std::replace(err.begin(), err.end(), ',', ';');
    os << ',' << err << '\n';
  }
}

}  // namespace bpdg
