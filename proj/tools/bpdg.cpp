// bpdg: design, fly and check bifurcation-guided powered descents.
//
//   bpdg design    SCENARIO            -> <name>_design.json
//   bpdg simulate  SCENARIO [--strict] -> <name>_trajectory.csv, <name>_result.json
//   bpdg sweep     SCENARIO...         -> sweep.json, sweep.csv
//   bpdg bifurcate --b B --c C --a-range LO HI [--n N]
//                                      -> bifurcation_stable.csv, bifurcation_unstable.csv
//   bpdg verify    SCENARIO            -> <name>_verify.json
//
// Exit status: 0 ok, 1 usage, 2 scenario/validation error, 3 runtime failure.
// Files go to --out, else $BPDG_OUTPUT_DIR, else the working directory.
// Diagnostics go to stderr.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bpdg/bpdg.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kScenario = 2, kRuntime = 3 };

struct Overrides {
  std::optional<double> dt;
  std::optional<double> epsilon;
  std::optional<std::string> fuel_model;
  std::optional<double> t_max;
  std::optional<std::string> stop;
};

// Scenario-phase failures (unreadable, malformed, invalid, infeasible).
struct ScenarioFailure {
  std::string message;
};

bpdg::Scenario load(const std::string& path, const Overrides& o) {
  try {
    bpdg::Scenario s = bpdg::load_scenario_file(path);
    if (o.dt) s.options.dt = *o.dt;
    if (o.t_max) s.options.t_max = *o.t_max;
    if (o.epsilon) {
      for (auto& ax : s.axes) ax.epsilon = *o.epsilon;
    }
    if (o.fuel_model) {
      const auto m = bpdg::parse_fuel_model(*o.fuel_model);
      if (!m) throw bpdg::ValidationError("--fuel-model", "expected command_only or gravity_compensated");
      s.options.fuel_model = *m;
    }
    if (o.stop) {
      const auto r = bpdg::parse_stop_rule(*o.stop);
      if (!r) throw bpdg::ValidationError("--stop", "expected termination_time or all_settled");
      s.options.stop = *r;
    }
    bpdg::validate(s);
    return s;
  } catch (const bpdg::Error& e) {
    throw ScenarioFailure{path + ": " + e.what()};
  }
}

bpdg::ScenarioDesign design(const bpdg::Scenario& s) {
  try {
    return bpdg::design_scenario(s);
  } catch (const bpdg::Error& e) {
    throw ScenarioFailure{s.name + ": " + e.what()};
  }
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << contents;
  if (!f) throw std::runtime_error("failed writing " + path.string());
  std::cerr << "wrote " << path.string() << '\n';
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--dt", o.dt, "Integrator step [s]")->check(CLI::PositiveNumber);
  cmd->add_option("--epsilon", o.epsilon, "Settling tolerance for every axis [m]")->check(CLI::PositiveNumber);
  cmd->add_option("--fuel-model", o.fuel_model, "command_only | gravity_compensated");
  cmd->add_option("--t-max", o.t_max, "Hard cap on simulated time [s]")->check(CLI::PositiveNumber);
  cmd->add_option("--stop", o.stop, "termination_time | all_settled");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bifurcation-based powered descent guidance"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string out_dir;
  if (const char* env = std::getenv("BPDG_OUTPUT_DIR")) out_dir = env;
  if (out_dir.empty()) out_dir = ".";
  app.add_option("-o,--out", out_dir, "Output directory");

  Overrides ov;
  std::string scenario_path;
  std::vector<std::string> scenario_paths;
  bool strict = false;
  double bif_b = 0.0, bif_c = 0.0;
  std::vector<double> a_range;
  int bif_n = 1001;
  double convergence_dt = bpdg::VerifyOptions{}.convergence_dt;

  auto* design_cmd = app.add_subcommand("design", "Design bifurcation parameters and termination time");
  design_cmd->add_option("scenario", scenario_path, "Scenario file")->required();
  add_overrides(design_cmd, ov);

  auto* sim_cmd = app.add_subcommand("simulate", "Fly the designed descent");
  sim_cmd->add_option("scenario", scenario_path, "Scenario file")->required();
  sim_cmd->add_flag("--strict", strict, "Exit 3 if the fuel load is exhausted");
  add_overrides(sim_cmd, ov);

  auto* sweep_cmd = app.add_subcommand("sweep", "Design and fly several scenarios");
  sweep_cmd->add_option("scenarios", scenario_paths, "Scenario files")->required();
  add_overrides(sweep_cmd, ov);

  auto* bif_cmd = app.add_subcommand("bifurcate", "Equilibrium branches as a function of a");
  bif_cmd->add_option("--b", bif_b, "Parameter b (> 0)")->required();
  bif_cmd->add_option("--c", bif_c, "Parameter c")->required();
  bif_cmd->add_option("--a-range", a_range, "Lower and upper a")->expected(2)->required();
  bif_cmd->add_option("--n", bif_n, "Grid points")->check(CLI::Range(2, 100000000));

  auto* verify_cmd = app.add_subcommand("verify", "Check closed-form predictions against the simulation");
  verify_cmd->add_option("scenario", scenario_path, "Scenario file")->required();
  verify_cmd->add_option("--convergence-dt", convergence_dt, "Coarsest step of the step-halving ladder [s]")
      ->check(CLI::PositiveNumber);
  add_overrides(verify_cmd, ov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    const fs::path out = out_dir;
    fs::create_directories(out);

    if (*design_cmd) {
      const bpdg::Scenario s = load(scenario_path, ov);
      const bpdg::ScenarioDesign d = design(s);
      write_file(out / (s.name + "_design.json"), dump(bpdg::design_summary(s, d)));
      std::cerr << s.name << ": T_s = " << bpdg::format_double(d.T_s) << " s\n";
      return kOk;
    }

    if (*sim_cmd) {
      const bpdg::Scenario s = load(scenario_path, ov);
      const bpdg::ScenarioDesign d = design(s);
      const bpdg::RunOutput r = bpdg::run(s, d);
      std::ostringstream csv;
      bpdg::write_trajectory_csv(csv, r.log);
      write_file(out / (s.name + "_trajectory.csv"), csv.str());
      write_file(out / (s.name + "_result.json"), dump(bpdg::result_summary(s, r)));
      const auto& res = r.result;
      std::cerr << s.name << ": terminated by " << bpdg::to_string(res.terminated_by) << " at t = "
                << bpdg::format_double(res.final_state.t) << " s, fuel used "
                << bpdg::format_double(res.fuel_used) << " kg\n";
      if (strict && res.depletion_time) {
        std::cerr << "error: fuel load exhausted at t = " << bpdg::format_double(*res.depletion_time) << " s\n";
        return kRuntime;
      }
      return kOk;
    }

    if (*sweep_cmd) {
      std::vector<bpdg::Scenario> scenarios;
      for (const auto& p : scenario_paths) scenarios.push_back(load(p, ov));
      const bpdg::SweepReport rep = bpdg::sweep(scenarios);
      std::ostringstream csv;
      bpdg::write_sweep_csv(csv, rep);
      write_file(out / "sweep.json", dump(bpdg::to_json(rep)));
      write_file(out / "sweep.csv", csv.str());
      for (const auto& c : rep.cases) {
        if (!c.error.empty()) std::cerr << c.name << ": " << c.error << '\n';
      }
      return kOk;
    }

    if (*bif_cmd) {
      bpdg::BifurcationDiagram diag;
      try {
        diag = bpdg::bifurcation_sweep(a_range[0], a_range[1], bif_n, bif_b, bif_c);
      } catch (const bpdg::Error& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
      }
      std::ostringstream stable, unstable;
      bpdg::write_bifurcation_csv(stable, diag.stable);
      bpdg::write_bifurcation_csv(unstable, diag.unstable);
      write_file(out / "bifurcation_stable.csv", stable.str());
      write_file(out / "bifurcation_unstable.csv", unstable.str());
      return kOk;
    }

    if (*verify_cmd) {
      const bpdg::Scenario s = load(scenario_path, ov);
      const bpdg::ScenarioDesign d = design(s);
      bpdg::VerifyOptions vo;
      vo.convergence_dt = convergence_dt;
      const bpdg::VerifyReport rep = bpdg::verify_closed_form(s, d, vo);
      write_file(out / (s.name + "_verify.json"), dump(bpdg::to_json(rep)));
      for (const auto& c : rep.checks) {
        if (!c.passed) {
          std::cerr << "FAIL " << c.name << (c.axis.empty() ? "" : "[" + c.axis + "]") << ": "
                    << bpdg::format_double(c.measured) << " > " << bpdg::format_double(c.tolerance) << '\n';
        }
      }
      std::cerr << s.name << ": " << (rep.all_passed() ? "all checks passed" : "verification failed") << '\n';
      return rep.all_passed() ? kOk : kRuntime;
    }
  } catch (const ScenarioFailure& f) {
    std::cerr << "error: " << f.message << '\n';
    return kScenario;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
