#pragma once

// Closed-form bifurcation guidance for a single Cartesian axis.
//
// Each axis flies the velocity field
//
//     V(r) = (a r + r^2) b + c
//
// whose two equilibria are placed so that the stable one coincides with the
// landing target. The design fixes the extremum of V at the initial position
// and makes the extremal velocity equal the initial velocity, so the vehicle
// decelerates monotonically onto the target. Everything here is a pure
// function of its arguments.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "bpdg/error.hpp"

namespace bpdg {

inline constexpr double kDefaultEpsilon = 0.1;

struct AxisBoundary {
  double r0 = 0.0;  // initial position [m]
  double v0 = 0.0;  // initial velocity [m/s]
  double rf = 0.0;  // target position [m]
  double epsilon = kDefaultEpsilon;  // settling tolerance [m]

  bool operator==(const AxisBoundary&) const = default;
};

struct AxisParams {
  double a = 0.0;  // [m]
  double b = 0.0;  // [1/(m s)]
  double c = 0.0;  // [m/s]

  bool operator==(const AxisParams&) const = default;
};

struct EquilibriumPair {
  double unstable = 0.0;  // -a/2 + sqrt(a^2/4 - c/b)
  double stable = 0.0;    // -a/2 - sqrt(a^2/4 - c/b)
};

enum class Equilibrium { unstable, stable };

struct CanonicalAxis {
  AxisBoundary boundary;
  int sign_flip = 1;
};

struct PeakAccel {
  double Q = 0.0;      // offset of the extremum from -a/2 [m]
  double r = 0.0;      // position of the extremum [m]
  double accel = 0.0;  // commanded acceleration there [m/s^2]
};

// A designed axis. `boundary` and every position-valued field live in the
// canonical frame (descending toward the target); `sign_flip` maps back to
// the physical axis.
struct AxisDesign {
  AxisBoundary boundary;
  AxisParams params;
  int sign_flip = 1;
  bool degenerate = false;  // pre-settled axis, zero command
  double P = 0.0;
  double K = 0.0;
  double Q = 0.0;
  EquilibriumPair equilibria;
  double t_settle = 0.0;
  double r_peak = 0.0;
  double a_peak = 0.0;

  AxisBoundary physical_boundary() const {
    const double s = sign_flip;
    return {s * boundary.r0, s * boundary.v0, s * boundary.rf, boundary.epsilon};
  }
};

namespace detail {

inline bool finite(double x) { return std::isfinite(x); }

}  // namespace detail

/// Maps an axis onto the descending regime (v0 < 0, rf < r0) by reflecting
/// r -> -r when both the velocity and the target offset are positive.
/// Degenerate axes (v0 = 0, rf = r0) come back unchanged.
inline CanonicalAxis canonicalize_axis(const AxisBoundary& in) {
  if (!detail::finite(in.r0) || !detail::finite(in.v0) || !detail::finite(in.rf) ||
      !detail::finite(in.epsilon)) {
    throw DomainError("axis boundary has non-finite fields");
  }
  if (!(in.epsilon > 0.0)) throw InvalidBound("settling tolerance must be positive");

  const double offset = in.rf - in.r0;
  if (in.v0 == 0.0 && offset == 0.0) return {in, 1};
  if (in.v0 == 0.0) throw DegenerateAxis("zero initial velocity but target differs from initial position");
  if (offset == 0.0 || in.v0 * offset <= 0.0) {
    throw InfeasibleAxis("initial velocity does not point toward the target");
  }
  if (in.v0 < 0.0) return {in, 1};
  return {{-in.r0, -in.v0, -in.rf, in.epsilon}, -1};
}

inline double velocity_at(double r, const AxisParams& p) { return (p.a * r + r * r) * p.b + p.c; }

/// Equilibria of the velocity field, or nullopt when a^2/4 - c/b < 0.
inline std::optional<EquilibriumPair> equilibria(const AxisParams& p) {
  if (p.b == 0.0) throw DomainError("equilibria undefined for b = 0");
  const double disc = p.a * p.a / 4.0 - p.c / p.b;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  return EquilibriumPair{-p.a / 2.0 + root, -p.a / 2.0 - root};
}

/// dV/dr at the requested equilibrium. For b > 0 this is +2 sqrt(a^2 b^2/4 - c b)
/// at the unstable point and its negation at the stable one.
inline double stability_slope(const AxisParams& p, Equilibrium which) {
  const double radicand = p.a * p.a * p.b * p.b / 4.0 - p.c * p.b;
  if (radicand < 0.0) throw NoEquilibria("a^2 b^2/4 - c b is negative");
  const double magnitude = 2.0 * std::sqrt(radicand);
  const double sign = p.b < 0.0 ? -1.0 : 1.0;
  return which == Equilibrium::unstable ? sign * magnitude : -sign * magnitude;
}

inline double derived_P(const AxisParams& p) { return p.a * p.a * p.b / 4.0 - p.c; }

// Integration constant of the tanh solution for a trajectory starting at r0.
inline double integration_constant(const AxisParams& p, double r0) {
  const double P = derived_P(p);
  if (!(P > 0.0) || !(p.b > 0.0)) throw DomainError("closed form requires P > 0 and b > 0");
  const double arg = (std::sqrt(p.b) * r0 + p.a * std::sqrt(p.b) / 2.0) / std::sqrt(P);
  if (std::abs(arg) >= 1.0) throw DomainError("atanh argument outside (-1, 1)");
  return -std::atanh(arg) / std::sqrt(P * p.b);
}

inline double closed_form_position(double t, const AxisParams& p, double r0) {
  const double P = derived_P(p);
  const double K = integration_constant(p, r0);
  return std::sqrt(P / p.b) * std::tanh(-std::sqrt(P * p.b) * (t + K)) - p.a / 2.0;
}

/// Canonical-frame position of a designed axis at time t.
inline double position_closed_form(double t, const AxisDesign& d) {
  if (d.degenerate) return d.boundary.r0;
  return closed_form_position(t, d.params, d.boundary.r0);
}

/// Time for the axis to close to within epsilon of the target.
inline double settling_time(const AxisBoundary& bc, const AxisParams& p) {
  const double r0 = bc.r0, rf = bc.rf, eps = bc.epsilon, a = p.a;
  const double num = eps * (r0 + rf + a);
  const double den = (2.0 * rf + a + eps) * (r0 - rf);
  if (!(eps < r0 - rf)) throw InvalidBound("settling tolerance must be smaller than the distance to go");
  const double ratio = num / den;
  if (!(ratio > 0.0) || !std::isfinite(ratio)) throw InvalidBound("settling-time log argument is not positive");
  return std::log(ratio) / (2.0 * p.b * (rf + a / 2.0));
}

inline double settling_time(const AxisDesign& d) {
  if (d.degenerate) return 0.0;
  return settling_time(d.boundary, d.params);
}

/// Powered-descent termination time: the slowest axis. Pre-settled axes
/// contribute zero.
inline double termination_time(std::span<const AxisDesign, 3> designs) {
  double t = 0.0;
  for (const auto& d : designs) t = std::max(t, d.t_settle);
  return t;
}

/// Commanded acceleration dV/dt = (dV/dr) V along trajectories of the field.
inline double accel_command(double r, const AxisParams& p) {
  return p.b * (p.a + 2.0 * r) * velocity_at(r, p);
}

// Same quantity expanded as a cubic in r; kept as a second algebraic route.
inline double accel_command_expanded(double r, const AxisParams& p) {
  const double a = p.a, b = p.b, c = p.c;
  return 2.0 * b * b * r * r * r + 3.0 * a * b * b * r * r + (a * a * b * b + 2.0 * b * c) * r + a * b * c;
}

/// Maximum of the command on the flown interval, at r = -a/2 - Q.
inline PeakAccel peak_accel(const AxisParams& p) {
  if (p.b == 0.0) throw NoInteriorExtremum("b = 0 gives a constant command");
  const double disc = p.a * p.a / 12.0 - p.c / (3.0 * p.b);
  if (disc < 0.0) throw NoInteriorExtremum("a^2/12 - c/(3b) is negative");
  const double Q = std::sqrt(disc);
  const double a = p.a, b = p.b, c = p.c;
  const double accel = -2.0 * b * b * Q * Q * Q + a * a * b * b * Q / 2.0 - 2.0 * Q * b * c;
  return {Q, -a / 2.0 - Q, accel};
}

/// Designs the three bifurcation parameters from the boundary conditions:
/// a = -2 r0, b = -v0 / (rf - r0)^2, c = v0 + a^2 b / 4.
inline AxisDesign design_axis(const AxisBoundary& physical) {
  const auto [bc, flip] = canonicalize_axis(physical);
  AxisDesign d;
  d.boundary = bc;
  d.sign_flip = flip;

  if (bc.v0 == 0.0 && bc.rf == bc.r0) {
    d.degenerate = true;
    d.params = {-2.0 * bc.r0, 0.0, 0.0};
    d.equilibria = {bc.r0, bc.r0};
    d.r_peak = bc.r0;
    return d;
  }

  const double a = -2.0 * bc.r0;
  const double offset = bc.rf - bc.r0;
  const double b = -bc.v0 / (offset * offset);
  const double c = bc.v0 + a * a * b / 4.0;
  d.params = {a, b, c};
  d.P = derived_P(d.params);
  d.K = integration_constant(d.params, bc.r0);
  const auto eq = equilibria(d.params);
  if (!eq) throw NoEquilibria("designed parameters have no equilibria");
  d.equilibria = *eq;
  d.t_settle = settling_time(d.boundary, d.params);
  const PeakAccel peak = peak_accel(d.params);
  d.Q = peak.Q;
  d.r_peak = peak.r;
  d.a_peak = peak.accel;
  return d;
}

/// Physical-frame command for a designed axis at physical position r.
inline double commanded_acceleration(const AxisDesign& d, double r) {
  if (d.degenerate) return 0.0;
  const double s = d.sign_flip;
  return s * accel_command(s * r, d.params);
}

/// Physical-frame closed-form position.
inline double physical_position(const AxisDesign& d, double t) {
  return d.sign_flip * position_closed_form(t, d);
}

}  // namespace bpdg
