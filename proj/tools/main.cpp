#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "dsa/commands.hpp"

using namespace dsa;

namespace {

void emit(const Json& report, const std::string& out) {
  if (out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    write_json_file(out, report);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Directed self-assembly control design and simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());

  std::string config;
  std::string out;
  std::string schedule;
  std::string model;
  std::string traj;
  std::string sweep_file;
  std::string out_dir;
  int trials = -1;
  std::uint64_t seed = 0;

  auto* design = app.add_subcommand("design", "optimize the control schedule");
  design->add_option("--config", config, "run configuration (JSON)")->required();
  design->add_option("--out", out, "report path (stdout if omitted)");

  auto* validate = app.add_subcommand("validate", "estimate the success rate of a schedule by simulation");
  validate->add_option("--config", config, "run configuration (JSON)")->required();
  validate->add_option("--schedule", schedule, "design report or schedule (JSON)")->required();
  validate->add_option("--trials", trials, "number of trials (default: config)");
  validate->add_option("--model", model, "continuous, discrete or both (default: config)")
      ->check(CLI::IsMember({"continuous", "discrete", "both"}));
  validate->add_option("--out", out, "report path (stdout if omitted)");

  auto* simulate = app.add_subcommand("simulate", "write one continuous trajectory as CSV");
  simulate->add_option("--config", config, "run configuration (JSON)")->required();
  simulate->add_option("--schedule", schedule, "design report or schedule (JSON)")->required();
  auto* seed_opt = simulate->add_option("--seed", seed, "trajectory seed (default: derived from the config seed)");
  simulate->add_option("--traj", traj, "CSV output path")->required();

  auto* sweep = app.add_subcommand("sweep", "repeat the design over a sigma and/or N_min grid");
  sweep->add_option("--config", config, "run configuration (JSON)")->required();
  sweep->add_option("--sweep", sweep_file, "grid specification (JSON)")->required();
  sweep->add_option("--out-dir", out_dir, "directory for report_<k>.json and sweep.csv (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const RunConfig cfg = load_config(config);
    if (*design) {
      emit(run_design(cfg), out);
    } else if (*validate) {
      const Schedule s = load_schedule(schedule, cfg);
      emit(run_validate(cfg, s, trials < 0 ? cfg.trials : trials, model.empty() ? cfg.model : model), out);
    } else if (*simulate) {
      const Schedule s = load_schedule(schedule, cfg);
      const std::uint64_t sd = seed_opt->count() ? seed : sub_seed(cfg, SeedStream::Simulate);
      Trajectory tr = run_simulate(cfg, s, sd);
      std::ofstream os(traj);
      if (!os) throw ConfigError("traj", "cannot write " + traj);
      write_trajectory_csv(os, tr);
    } else if (*sweep) {
      SweepResult r = run_sweep(cfg, read_json_file(sweep_file));
      if (out_dir.empty()) {
        Json all = Json::array();
        for (auto& rep : r.reports) all.push_back(rep);
        std::cout << all.dump(2) << '\n' << r.csv;
      } else {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (ec) throw ConfigError("out-dir", "cannot create " + out_dir + ": " + ec.message());
        for (std::size_t k = 0; k < r.reports.size(); ++k) {
          write_json_file(out_dir + "/report_" + std::to_string(k) + ".json", r.reports[k]);
        }
        std::ofstream os(out_dir + "/sweep.csv");
        if (!os) throw ConfigError("out-dir", "cannot write " + out_dir + "/sweep.csv");
        os << r.csv;
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
