#pragma once

// Fixed-step closed-loop simulation of the point-mass descent.
//
// Kinematics: r' = v, v' = A_cmd(r), with the command evaluated from the
// simulated position every stage (position feedback). The engine supplies
// a_thrust = A_cmd - g (gravity_compensated) or a_thrust = A_cmd
// (command_only), and the mass follows m' = -m |a_thrust| / v_ex.
//
// States are advanced with classical RK4. Increments are accumulated with
// compensated summation: near the target the closed-loop system has a
// saddle, so rounding committed early in a run is amplified by roughly
// exp(2 |v0| T / (r0 - rf)) by the end of it.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <ostream>
#include <vector>

#include "bpdg/error.hpp"
#include "bpdg/format.hpp"
#include "bpdg/guidance.hpp"
#include "bpdg/scenario.hpp"
#include "json.hpp"

namespace bpdg {

struct SimState {
  double t = 0.0;
  Vec3 r{};
  Vec3 v{};
  double m = 0.0;
};

struct TrajectoryRecord {
  double t = 0.0;
  Vec3 r{};
  Vec3 v{};
  Vec3 a_cmd{};
  Vec3 a_thrust{};
  double thrust_N = 0.0;
  double m = 0.0;
};

struct TrajectoryLog {
  std::vector<TrajectoryRecord> records;
};

enum class Termination { termination_time, all_settled, t_max, fuel_depleted };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::termination_time: return "termination_time";
    case Termination::all_settled: return "all_settled";
    case Termination::t_max: return "t_max";
    case Termination::fuel_depleted: return "fuel_depleted";
  }
  return "unknown";
}

struct SimResult {
  Vec3 final_error{};                                // |r - rf| per axis [m]
  std::array<std::optional<double>, 3> observed_settle;  // first |r - rf| <= eps [s]
  double fuel_used = 0.0;                            // [kg]
  Vec3 observed_peak_cmd{};                          // max |a_cmd| per axis [m/s^2]
  Termination terminated_by = Termination::termination_time;
  std::optional<double> depletion_time;              // when m first reached m_dry [s]
  SimState final_state;
  long steps = 0;
};

struct RunOutput {
  ScenarioDesign design;
  SimResult result;
  TrajectoryLog log;
};

inline double norm(const Vec3& x) { return std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]); }

inline Vec3 command_vector(const ScenarioDesign& d, const Vec3& r) {
  return {commanded_acceleration(d.axes[0], r[0]), commanded_acceleration(d.axes[1], r[1]),
          commanded_acceleration(d.axes[2], r[2])};
}

inline Vec3 thrust_acceleration(const Vec3& a_cmd, const Scenario& s) {
  if (s.options.fuel_model == FuelModel::command_only) return a_cmd;
  const Vec3& g = s.environment.gravity;
  return {a_cmd[0] - g[0], a_cmd[1] - g[1], a_cmd[2] - g[2]};
}

struct StateIncrement {
  Vec3 dr{};
  Vec3 dv{};
  double dm = 0.0;
};

/// One RK4 increment of (r, v, m) over dt.
inline StateIncrement rk4_increment(const SimState& x, const ScenarioDesign& d, const Scenario& s, double dt) {
  struct Deriv {
    Vec3 rdot, vdot;
    double mdot;
  };
  auto f = [&](const Vec3& r, const Vec3& v, double m) {
    const Vec3 a = command_vector(d, r);
    const double mdot = -m * norm(thrust_acceleration(a, s)) / s.vehicle.v_ex;
    return Deriv{v, a, mdot};
  };
  auto shifted = [](const Vec3& base, const Vec3& slope, double h) {
    return Vec3{base[0] + h * slope[0], base[1] + h * slope[1], base[2] + h * slope[2]};
  };
  const Deriv k1 = f(x.r, x.v, x.m);
  const Deriv k2 = f(shifted(x.r, k1.rdot, dt / 2), shifted(x.v, k1.vdot, dt / 2), x.m + dt / 2 * k1.mdot);
  const Deriv k3 = f(shifted(x.r, k2.rdot, dt / 2), shifted(x.v, k2.vdot, dt / 2), x.m + dt / 2 * k2.mdot);
  const Deriv k4 = f(shifted(x.r, k3.rdot, dt), shifted(x.v, k3.vdot, dt), x.m + dt * k3.mdot);
  StateIncrement inc;
  for (std::size_t i = 0; i < 3; ++i) {
    inc.dr[i] = dt / 6 * (k1.rdot[i] + 2 * k2.rdot[i] + 2 * k3.rdot[i] + k4.rdot[i]);
    inc.dv[i] = dt / 6 * (k1.vdot[i] + 2 * k2.vdot[i] + 2 * k3.vdot[i] + k4.vdot[i]);
  }
  inc.dm = dt / 6 * (k1.mdot + 2 * k2.mdot + 2 * k3.mdot + k4.mdot);
  return inc;
}

/// Advances the state by one RK4 step. Throws FuelDepleted if the step
/// would take the mass below the dry mass.
inline SimState step(const SimState& x, const ScenarioDesign& d, const Scenario& s, double dt) {
  if (!(dt > 0.0)) throw DomainError("step size must be positive");
  const StateIncrement inc = rk4_increment(x, d, s, dt);
  SimState next = x;
  next.t = x.t + dt;
  for (std::size_t i = 0; i < 3; ++i) {
    next.r[i] += inc.dr[i];
    next.v[i] += inc.dv[i];
  }
  next.m += inc.dm;
  if (next.m < s.vehicle.m_dry) throw FuelDepleted("mass would fall below the dry mass");
  return next;
}

inline SimState initial_state(const Scenario& s) {
  SimState x;
  for (std::size_t i = 0; i < 3; ++i) {
    x.r[i] = s.axes[i].r0;
    x.v[i] = s.axes[i].v0;
  }
  x.m = s.vehicle.m0();
  return x;
}

namespace detail {

// Kahan-compensated accumulator.
struct Compensated {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

inline TrajectoryRecord make_record(const SimState& x, const ScenarioDesign& d, const Scenario& s) {
  TrajectoryRecord rec;
  rec.t = x.t;
  rec.r = x.r;
  rec.v = x.v;
  rec.a_cmd = command_vector(d, x.r);
  rec.a_thrust = thrust_acceleration(rec.a_cmd, s);
  rec.thrust_N = x.m * norm(rec.a_thrust);
  rec.m = x.m;
  return rec;
}

}  // namespace detail

/// Flies a designed scenario from powered-descent initiation. `design` is
/// normally design_scenario(s); it is a parameter so callers can inject a
/// modified design.
inline RunOutput run(const Scenario& s, const ScenarioDesign& design) {
  const SimOptions& opt = s.options;
  const double dt = opt.dt;
  const double t_max = effective_t_max(s, design.T_s);
  const bool stop_at_T = opt.stop == StopRule::termination_time;
  const double horizon = stop_at_T ? std::min(design.T_s, t_max) : t_max;
  const long n_steps = horizon <= 0.0 ? 0 : static_cast<long>(std::ceil(horizon / dt - 1e-9));

  RunOutput out;
  out.design = design;
  SimResult& res = out.result;
  res.terminated_by = (stop_at_T && design.T_s <= t_max) ? Termination::termination_time : Termination::t_max;

  SimState x = initial_state(s);
  std::array<detail::Compensated, 3> r_acc, v_acc;
  detail::Compensated m_acc;
  for (std::size_t i = 0; i < 3; ++i) {
    r_acc[i].sum = x.r[i];
    v_acc[i].sum = x.v[i];
  }
  m_acc.sum = x.m;

  Vec3 rf{};
  for (std::size_t i = 0; i < 3; ++i) rf[i] = s.axes[i].rf;
  Vec3 prev_err{};
  auto track = [&](const SimState& state, double t_prev) {
    const Vec3 a = command_vector(design, state.r);
    for (std::size_t i = 0; i < 3; ++i) {
      res.observed_peak_cmd[i] = std::max(res.observed_peak_cmd[i], std::abs(a[i]));
      const double err = std::abs(state.r[i] - rf[i]);
      const double eps = s.axes[i].epsilon;
      if (!res.observed_settle[i] && err <= eps) {
        if (state.t == 0.0 || prev_err[i] <= err) {
          res.observed_settle[i] = state.t;
        } else {
          const double frac = (prev_err[i] - eps) / (prev_err[i] - err);
          res.observed_settle[i] = t_prev + frac * (state.t - t_prev);
        }
      }
      prev_err[i] = err;
    }
  };
  auto all_settled = [&] {
    return res.observed_settle[0] && res.observed_settle[1] && res.observed_settle[2];
  };

  track(x, 0.0);
  out.log.records.push_back(detail::make_record(x, design, s));
  bool logged_last = true;

  if (!stop_at_T && all_settled()) {
    res.terminated_by = Termination::all_settled;
  } else {
    for (long k = 1; k <= n_steps; ++k) {
      const double t_prev = x.t;
      double h = dt;
      StateIncrement inc = rk4_increment(x, design, s, h);
      bool depleted_now = false;
      const double m_next = m_acc.sum + inc.dm;
      if (!res.depletion_time && m_next < s.vehicle.m_dry) {
        // ln m is close to linear over a step; interpolate the crossing.
        const double frac = std::clamp(std::log(x.m / s.vehicle.m_dry) / std::log(x.m / m_next), 0.0, 1.0);
        if (opt.stop_on_depletion) {
          h = frac * dt;
          inc = rk4_increment(x, design, s, h);
          depleted_now = true;
        }
        res.depletion_time = t_prev + frac * dt;
      }
      for (std::size_t i = 0; i < 3; ++i) {
        r_acc[i].add(inc.dr[i]);
        v_acc[i].add(inc.dv[i]);
        x.r[i] = r_acc[i].sum;
        x.v[i] = v_acc[i].sum;
      }
      m_acc.add(inc.dm);
      x.m = depleted_now ? std::max(m_acc.sum, s.vehicle.m_dry) : m_acc.sum;
      x.t = depleted_now ? t_prev + h : static_cast<double>(k) * dt;
      res.steps = k;

      track(x, t_prev);
      logged_last = false;
      if (k % opt.log_stride == 0 || depleted_now) {
        out.log.records.push_back(detail::make_record(x, design, s));
        logged_last = true;
      }
      if (depleted_now) {
        res.terminated_by = Termination::fuel_depleted;
        break;
      }
      if (!stop_at_T && all_settled()) {
        res.terminated_by = Termination::all_settled;
        break;
      }
    }
  }
  if (!logged_last) out.log.records.push_back(detail::make_record(x, design, s));

  res.final_state = x;
  for (std::size_t i = 0; i < 3; ++i) res.final_error[i] = std::abs(x.r[i] - rf[i]);
  res.fuel_used = s.vehicle.m0() - x.m;
  return out;
}

inline RunOutput run(const Scenario& s) { return run(s, design_scenario(s)); }

inline constexpr const char* kTrajectoryCsvHeader =
    "t,rx,ry,rz,vx,vy,vz,ax_cmd,ay_cmd,az_cmd,ax_thr,ay_thr,az_thr,thrust_N,mass_kg";

/// Trajectory log as CSV, numbers in shortest round-trip form.
inline void write_trajectory_csv(std::ostream& os, const TrajectoryLog& log) {
  os << kTrajectoryCsvHeader << '\n';
  for (const auto& rec : log.records) {
    os << format_double(rec.t);
    for (const Vec3* v : {&rec.r, &rec.v, &rec.a_cmd, &rec.a_thrust}) {
      for (double c : *v) os << ',' << format_double(c);
    }
    os << ',' << format_double(rec.thrust_N) << ',' << format_double(rec.m) << '\n';
  }
}

inline nlohmann::ordered_json to_json(const SimResult& r) {
  nlohmann::ordered_json settle = nlohmann::ordered_json::array();
  for (const auto& t : r.observed_settle) settle.push_back(t ? nlohmann::ordered_json(*t) : nlohmann::ordered_json(nullptr));
  nlohmann::ordered_json j;
  j["final_error"] = r.final_error;
  j["observed_settle"] = settle;
  j["fuel_used"] = r.fuel_used;
  j["observed_peak_cmd"] = r.observed_peak_cmd;
  j["terminated_by"] = to_string(r.terminated_by);
  j["depletion_time"] = r.depletion_time ? nlohmann::ordered_json(*r.depletion_time) : nlohmann::ordered_json(nullptr);
  j["final_state"] = {{"t", r.final_state.t}, {"r", r.final_state.r}, {"v", r.final_state.v}, {"m", r.final_state.m}};
  j["steps"] = r.steps;
  return j;
}

inline nlohmann::ordered_json result_summary(const Scenario& s, const RunOutput& out) {
  nlohmann::ordered_json j;
  j["scenario"] = s.name;
  j["T_s"] = out.design.T_s;
  j["result"] = to_json(out.result);
  j["config"] = to_json(s);
  return j;
}

}  // namespace bpdg
