// spherekick <experiment> --config <path> [--threads n] [--out dir]

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "spherekick/parallel.hpp"
#include "spherekick/runner.hpp"

namespace {

std::string experiment_list() {
  std::string s;
  for (const char* e : spherekick::experiment_names) {
    if (!s.empty()) s += ", ";
    s += e;
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kicked Navier-Stokes flow on the rotating sphere"};
  std::string experiment;
  std::string config_path;
  int threads = 1;
  std::string out_dir;
  app.add_option("experiment", experiment, "one of: " + experiment_list())->required();
  app.add_option("--config", config_path, "JSON experiment config")->required();
  app.add_option("--threads", threads, "worker threads (SPHEREKICK_THREADS overrides)")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory (overrides output_dir in the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : spherekick::exit_error;
  }

  if (!spherekick::is_experiment(experiment)) {
    std::cerr << "unknown experiment '" << experiment << "'\n\n" << app.help();
    return spherekick::exit_error;
  }

  spherekick::ExperimentConfig cfg;
  try {
    cfg = spherekick::parse_config_file(config_path);
  } catch (const spherekick::ConfigError& e) {
    std::cerr << "invalid config '" << config_path << "':\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << '\n';
    return spherekick::exit_error;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return spherekick::exit_error;
  }
  if (!cfg.experiment.empty() && cfg.experiment != experiment) {
    std::cerr << "note: config names experiment '" << cfg.experiment << "', running '" << experiment << "'\n";
  }
  cfg.experiment = experiment;

  spherekick::RunOptions opts;
  opts.threads = spherekick::resolve_worker_count(threads);
  if (!out_dir.empty()) opts.out_dir = out_dir;
  opts.log = &std::cerr;
  const spherekick::RunResult result = spherekick::run(cfg, opts);
  if (!result.summary.empty()) std::cout << result.summary.string() << '\n';
  return result.exit_code;
}
