#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "coed/commands.hpp"
#include "coed/config.hpp"
#include "coed/types.hpp"

namespace {

struct Cli {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool exact = false;
};

coed::config::ExperimentConfig resolve(const Cli& cli) {
  coed::config::ExperimentConfig cfg;
  if (!cli.config_path.empty()) cfg = coed::config::parse_file(cli.config_path);
  for (const auto& line : cli.overrides) coed::config::apply_assignment(cfg, line);
  if (!cli.out_dir.empty()) cfg.output_dir = cli.out_dir;
  if (cli.seed_set) cfg.seed = cli.seed;
  cfg.exact = cli.exact;
  cfg.threads = cli.threads;
  coed::config::validate(cfg);
#ifdef _OPENMP
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensor placement, inversion and control for the heat-exchange testbed"};
  app.require_subcommand(1);

  Cli cli;
  app.add_option("--config", cli.config_path, "Experiment description (key=value file)")
      ->check(CLI::ExistingFile);
  app.add_option("--set", cli.overrides, "Override one key (key=value), repeatable");
  app.add_option("--out", cli.out_dir, "Output directory (overrides output.dir)");
  app.add_option("--seed", cli.seed, "Root seed (overrides the config)")
      ->each([&cli](const std::string&) { cli.seed_set = true; });
  app.add_option("--threads", cli.threads, "OpenMP thread count (0 = runtime default)");
  app.add_flag("--exact-mode", cli.exact,
               "Cross-check low-rank results against dense factorizations (small meshes)");

  using Cmd = std::function<void(const coed::config::ExperimentConfig&)>;
  std::vector<std::pair<CLI::App*, Cmd>> dispatch = {
      {app.add_subcommand("invert", "Synthesize data and recover the source field"),
       coed::cli::cmd_invert},
      {app.add_subcommand("oed", "Select sensor designs by greedy exchange"), coed::cli::cmd_oed},
      {app.add_subcommand("control", "Steer the terminal state from the recovered source"),
       coed::cli::cmd_control},
      {app.add_subcommand("uq", "Moments and tail bounds of the control objective"),
       coed::cli::cmd_uq},
      {app.add_subcommand("spectra", "Forward-map and misfit-Hessian spectra"),
       coed::cli::cmd_spectra},
      {app.add_subcommand("all", "Run every phase in order"), coed::cli::cmd_all},
  };

  for (auto& [sub, fn] : dispatch) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    coed::config::ExperimentConfig cfg = resolve(cli);
    for (auto& [sub, fn] : dispatch)
      if (sub->parsed()) fn(cfg);
    return 0;
  } catch (const coed::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const coed::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
