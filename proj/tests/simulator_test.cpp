#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "bpdg/analysis.hpp"
#include "bpdg/simulator.hpp"
#include "test_support.hpp"

namespace bpdg {
namespace {

using test::case_a;
using test::rel;

// Trapezoidal integral of f(record) over the log.
template <class F>
double integrate(const TrajectoryLog& log, F f) {
  double sum = 0.0;
  for (std::size_t k = 1; k < log.records.size(); ++k) {
    sum += 0.5 * (f(log.records[k]) + f(log.records[k - 1])) * (log.records[k].t - log.records[k - 1].t);
  }
  return sum;
}

SimState at_target(const Scenario& s) {
  SimState x;
  for (std::size_t i = 0; i < 3; ++i) x.r[i] = s.axes[i].rf;
  x.m = s.vehicle.m0();
  return x;
}

// -- step --------------------------------------------------------------------

TEST(Step, EquilibriumHoverBurnsFuel) {
  Scenario s = case_a();
  s.options.fuel_model = FuelModel::gravity_compensated;
  const ScenarioDesign d = design_scenario(s);
  const SimState x0 = at_target(s);
  const SimState x1 = step(x0, d, s, 0.01);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(x1.r[i], x0.r[i], 1e-9);
    EXPECT_NEAR(x1.v[i], 0.0, 1e-9);
  }
  // Constant hover: m(t) = m0 exp(-g t / v_ex).
  EXPECT_NEAR(x1.m, 2000 * std::exp(-3.721 * 0.01 / 2206.575), 1e-9);
  EXPECT_NEAR((x0.m - x1.m) / 0.01, 2000 * 3.721 / 2206.575, 1e-4);
  EXPECT_DOUBLE_EQ(x1.t, 0.01);
}

TEST(Step, EquilibriumCommandOnlyKeepsMass) {
  const Scenario s = case_a();
  const ScenarioDesign d = design_scenario(s);
  const SimState x0 = at_target(s);
  const SimState x1 = step(x0, d, s, 0.01);
  EXPECT_NEAR(x1.m, x0.m, 1e-12);
}

TEST(Step, FirstStepFromPdiBarelyChangesVelocity) {
  const Scenario s = case_a();
  const ScenarioDesign d = design_scenario(s);
  const SimState x0 = initial_state(s);
  const Vec3 a0 = command_vector(d, x0.r);
  for (double a : a0) EXPECT_EQ(a, 0.0);
  const SimState x1 = step(x0, d, s, 0.01);
  for (std::size_t i = 0; i < 3; ++i) {
    // Second order in dt: the command grows linearly from zero.
    EXPECT_LT(std::abs(x1.v[i] - x0.v[i]), 1e-4);
    EXPECT_NEAR(x1.r[i], x0.r[i] + 0.01 * x0.v[i], 1e-6);
  }
}

TEST(Step, FuelDepletedThrows) {
  Scenario s = case_a();
  s.options.fuel_model = FuelModel::gravity_compensated;
  s.vehicle.m_fuel0 = 1e-6;
  const ScenarioDesign d = design_scenario(s);
  EXPECT_THROW(step(at_target(s), d, s, 1.0), FuelDepleted);
  EXPECT_THROW(step(at_target(s), d, s, 0.0), DomainError);
}

// -- run ---------------------------------------------------------------------

class CaseARun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    scenario_ = new Scenario(case_a());
    out_ = new RunOutput(run(*scenario_));
  }
  static void TearDownTestSuite() {
    delete out_;
    delete scenario_;
  }
  static Scenario* scenario_;
  static RunOutput* out_;
};
Scenario* CaseARun::scenario_ = nullptr;
RunOutput* CaseARun::out_ = nullptr;

TEST_F(CaseARun, TerminatesAtTerminationTime) {
  const SimResult& r = out_->result;
  EXPECT_EQ(r.terminated_by, Termination::termination_time);
  EXPECT_GE(r.final_state.t, out_->design.T_s);
  EXPECT_LT(r.final_state.t, out_->design.T_s + scenario_->options.dt);
  EXPECT_FALSE(r.depletion_time);
}

TEST_F(CaseARun, TargetsWithinTolerance) {
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(out_->result.final_error[i], 0.1) << i;
}

TEST_F(CaseARun, ObservedSettleMatchesPrediction) {
  const double ts[] = {250.4512, 495.1718, 341.4793};
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_TRUE(out_->result.observed_settle[i]);
    EXPECT_LT(rel(*out_->result.observed_settle[i], ts[i]), 1e-2);
    EXPECT_NEAR(*out_->result.observed_settle[i], out_->design.axes[i].t_settle, 1e-3);
  }
}

TEST_F(CaseARun, ObservedPeakMatchesClosedForm) {
  const double peak[] = {0.6482, 0.0769, 0.6218};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(out_->result.observed_peak_cmd[i], peak[i], 1e-3);
    EXPECT_NEAR(out_->result.observed_peak_cmd[i], out_->design.axes[i].a_peak, 1e-8);
  }
}

TEST_F(CaseARun, ClosedFormAgreement) {
  const Vec3 dev = closed_form_deviation(out_->log, out_->design);
  for (double e : dev) EXPECT_LE(e, 1e-3);
}

TEST_F(CaseARun, MonotoneApproachAndDeceleration) {
  const auto& recs = out_->log.records;
  for (std::size_t k = 1; k < recs.size(); ++k) {
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_LE(std::abs(recs[k].v[i]), std::abs(recs[k - 1].v[i]) + 1e-9);
      EXPECT_LE(recs[k].r[i], recs[k - 1].r[i] + 1e-9);
      EXPECT_GE(recs[k].r[i], scenario_->axes[i].rf - 1e-3);
    }
  }
}

TEST_F(CaseARun, VelocityChangeIdentity) {
  for (std::size_t i = 0; i < 3; ++i) {
    const double dv = integrate(out_->log, [i](const TrajectoryRecord& r) { return std::abs(r.a_cmd[i]); });
    EXPECT_LT(rel(dv, std::abs(scenario_->axes[i].v0)), 1e-3) << i;
  }
}

TEST_F(CaseARun, CommandOnlyFuelFromRocketEquation) {
  // With thrust acceleration equal to the command, the burned mass follows
  // from the accumulated command magnitude alone.
  const double impulse = integrate(out_->log, [](const TrajectoryRecord& r) { return norm(r.a_cmd); });
  const double expected = 2000 * (1 - std::exp(-impulse / 2206.575));
  EXPECT_LT(rel(out_->result.fuel_used, expected), 1e-3);
  // The norm is bounded by the per-axis sums of |dv| = 40 + 10 + 50.
  EXPECT_LT(impulse, 100.0);
  EXPECT_GT(impulse, std::sqrt(40.0 * 40 + 10 * 10 + 50 * 50) * 0.99);
}

TEST_F(CaseARun, LogLayout) {
  const auto& recs = out_->log.records;
  ASSERT_GE(recs.size(), 2u);
  EXPECT_EQ(recs.front().t, 0.0);
  EXPECT_EQ(recs.back().t, out_->result.final_state.t);
  const double spacing = scenario_->options.dt * scenario_->options.log_stride;
  for (std::size_t k = 1; k + 1 < recs.size(); ++k) {
    EXPECT_GT(recs[k].t, recs[k - 1].t);
    EXPECT_NEAR(recs[k].t - recs[k - 1].t, spacing, 1e-9);
  }
  EXPECT_GT(recs.back().t, recs[recs.size() - 2].t);
}

TEST_F(CaseARun, CsvExport) {
  std::ostringstream os;
  write_trajectory_csv(os, out_->log);
  std::istringstream in(os.str());
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header, "t,rx,ry,rz,vx,vy,vz,ax_cmd,ay_cmd,az_cmd,ax_thr,ay_thr,az_thr,thrust_N,mass_kg");
  std::size_t rows = 0;
  while (std::getline(in, row)) {
    ++rows;
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 14);
  }
  EXPECT_EQ(rows, out_->log.records.size());
  // Shortest round-trip text parses back to the logged value.
  std::istringstream second(os.str());
  std::getline(second, row);
  for (int k = 0; k < 12; ++k) std::getline(second, row);
  double t = 0.0;
  ASSERT_TRUE(parse_double(row.substr(0, row.find(',')), t));
  EXPECT_EQ(t, out_->log.records[11].t);
}

TEST(Run, RocketEquationIdentityBothModels) {
  for (FuelModel model : {FuelModel::command_only, FuelModel::gravity_compensated}) {
    Scenario s = case_a();
    s.options.fuel_model = model;
    s.options.stop_on_depletion = false;
    const RunOutput out = run(s);
    double impulse = 0.0;
    const auto& recs = out.log.records;
    for (std::size_t k = 1; k < recs.size(); ++k) {
      impulse += 0.5 * (norm(recs[k].a_thrust) + norm(recs[k - 1].a_thrust)) * (recs[k].t - recs[k - 1].t);
      const double burned = s.vehicle.v_ex * std::log(s.vehicle.m0() / recs[k].m);
      ASSERT_LT(rel(burned, impulse), 1e-3) << to_string(model) << " t=" << recs[k].t;
      ASSERT_LE(recs[k].m, recs[k - 1].m);
    }
  }
}

TEST(Run, HoverBurnExhaustsCaseAFuel) {
  Scenario s = case_a();
  s.options.fuel_model = FuelModel::gravity_compensated;
  const RunOutput out = run(s);
  EXPECT_EQ(out.result.terminated_by, Termination::fuel_depleted);
  ASSERT_TRUE(out.result.depletion_time);
  EXPECT_LT(*out.result.depletion_time, out.design.T_s);
  EXPECT_NEAR(out.result.fuel_used, 500.0, 1e-6);
  EXPECT_LE(out.result.fuel_used, s.vehicle.m_fuel0 + 1e-9);
  EXPECT_GE(out.result.final_state.m, s.vehicle.m_dry);
  EXPECT_EQ(out.log.records.back().t, out.result.final_state.t);

  // The z command decelerates the descent, so |g| <= |a_thr| <= |g| + sum of
  // peak commands; depletion is bracketed by the matching constant burns.
  const double burn = 2206.575 * std::log(2000.0 / 1500.0);
  double peaks = 0.0;
  for (const auto& ax : out.design.axes) peaks += ax.a_peak;
  EXPECT_LE(*out.result.depletion_time, burn / 3.721);
  EXPECT_GE(*out.result.depletion_time, burn / (3.721 + peaks));
}

TEST(Run, IgnoringDepletionFliesOn) {
  Scenario s = case_a();
  s.options.fuel_model = FuelModel::gravity_compensated;
  s.options.stop_on_depletion = false;
  const RunOutput out = run(s);
  EXPECT_EQ(out.result.terminated_by, Termination::termination_time);
  ASSERT_TRUE(out.result.depletion_time);
  EXPECT_GT(out.result.fuel_used, s.vehicle.m_fuel0);
  for (double e : out.result.final_error) EXPECT_LE(e, 0.1);
}

TEST(Run, AllSettledStopsEarly) {
  Scenario s = case_a();
  s.options.stop = StopRule::all_settled;
  const RunOutput out = run(s);
  EXPECT_EQ(out.result.terminated_by, Termination::all_settled);
  const double last = std::max({*out.result.observed_settle[0], *out.result.observed_settle[1],
                                *out.result.observed_settle[2]});
  EXPECT_GE(out.result.final_state.t, last);
  EXPECT_LT(out.result.final_state.t, last + s.options.dt + 1e-9);
}

TEST(Run, TMaxCapsTheRun) {
  Scenario s = case_a();
  s.options.t_max = 100.0;
  const RunOutput out = run(s);
  EXPECT_EQ(out.result.terminated_by, Termination::t_max);
  EXPECT_NEAR(out.result.final_state.t, 100.0, 1e-9);
  EXPECT_FALSE(out.result.observed_settle[0]);
}

TEST(Run, MirroredScenarioMirrorsTrajectory) {
  const Scenario fwd = case_a();
  Scenario mir = fwd;
  for (auto& ax : mir.axes) ax = {-ax.r0, -ax.v0, -ax.rf, ax.epsilon};
  mir.environment.gravity = {0, 0, 3.721};
  const RunOutput a = run(fwd), b = run(mir);
  ASSERT_EQ(a.log.records.size(), b.log.records.size());
  for (std::size_t k = 0; k < a.log.records.size(); k += 97) {
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(b.log.records[k].r[i], -a.log.records[k].r[i]);
      EXPECT_EQ(b.log.records[k].a_cmd[i], -a.log.records[k].a_cmd[i]);
    }
  }
  EXPECT_EQ(a.result.fuel_used, b.result.fuel_used);
}

TEST(Run, DegenerateAxisStaysPut) {
  Scenario s = case_a();
  s.axes[1] = {40, 0, 40, 0.1};
  const RunOutput out = run(s);
  for (const auto& rec : out.log.records) {
    EXPECT_EQ(rec.r[1], 40.0);
    EXPECT_EQ(rec.a_cmd[1], 0.0);
  }
  ASSERT_TRUE(out.result.observed_settle[1]);
  EXPECT_EQ(*out.result.observed_settle[1], 0.0);
}

TEST(Run, AllDegenerateNeedsNoSteps) {
  Scenario s = case_a();
  for (auto& ax : s.axes) ax = {1, 0, 1, 0.1};
  const RunOutput out = run(s);
  EXPECT_EQ(out.result.steps, 0);
  EXPECT_EQ(out.log.records.size(), 1u);
  EXPECT_EQ(out.result.fuel_used, 0.0);
}

TEST(Run, StepHalvingIsFourthOrderOrBetter) {
  const Scenario s = case_a();
  const ConvergenceStudy cs = convergence_study(s, design_scenario(s), 0.5, 3);
  ASSERT_EQ(cs.ratios.size(), 2u);
  for (double r : cs.ratios) EXPECT_GE(r, 8.0);
}

TEST(Run, Deterministic) {
  const RunOutput a = run(case_a()), b = run(case_a());
  std::ostringstream x, y;
  write_trajectory_csv(x, a.log);
  write_trajectory_csv(y, b.log);
  EXPECT_EQ(x.str(), y.str());
}

TEST(SimResultJson, Fields) {
  const Scenario s = case_a();
  const auto j = result_summary(s, run(s));
  for (const char* key : {"final_error", "observed_settle", "fuel_used", "observed_peak_cmd", "terminated_by"}) {
    EXPECT_TRUE(j["result"].contains(key)) << key;
  }
  EXPECT_EQ(j["result"]["terminated_by"], "termination_time");
  EXPECT_EQ(j["config"]["options"]["fuel_model"], "command_only");
}

}  // namespace
}  // namespace bpdg
