// Designs and flies the 1.9/1.0/3.1 km sample landing without a scenario
// file, printing the per-axis design and the touchdown state.

#include <cstdio>

#include "bpdg/bpdg.hpp"

int main() {
  bpdg::Scenario s;
  s.name = "case_a";
  s.vehicle = {1500.0, 500.0, 2206.575};
  s.axes = {{{1900.0, -40.0, 0.0}, {1000.0, -10.0, 0.0}, {3100.0, -50.0, 5.0}}};
  s.options.fuel_model = bpdg::FuelModel::command_only;
  bpdg::validate(s);

  const bpdg::ScenarioDesign d = bpdg::design_scenario(s);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& ax = d.axes[i];
    std::printf("%s: a=%.6g b=%.6g c=%.6g t_s=%.4f s peak=%.4f m/s^2\n", bpdg::kAxisNames[i], ax.params.a,
                ax.params.b, ax.params.c, ax.t_settle, ax.a_peak);
  }
  std::printf("T_s = %.4f s\n", d.T_s);

  const bpdg::RunOutput out = bpdg::run(s, d);
  const auto& r = out.result;
  std::printf("final error [m]: %.4g %.4g %.4g, fuel used %.3f kg\n", r.final_error[0], r.final_error[1],
              r.final_error[2], r.fuel_used);
  return 0;
}
