#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "sdmd/config.hpp"
#include "sdmd/errors.hpp"
#include "sdmd/experiments.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("-c,--config", args.config_path, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("-o,--out", args.out_dir, "output directory (overrides the config)");
  sub->add_option("-s,--seed", args.seed, "seed override, propagated to training");
  sub->add_option("-t,--threads", args.threads, "worker thread count override");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic Koopman spectral analysis harness"};
  app.require_subcommand(1);
  CommonArgs args;
  for (const char* name : {"simulate", "spectrum", "convergence", "compare", "neuralmass"})
    add_common(app.add_subcommand(name), args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    sdmd::ExperimentConfig cfg = sdmd::load_config(args.config_path);
    if (!args.out_dir.empty()) cfg.output = args.out_dir;
    if (args.seed) {
      cfg.seed = *args.seed;
      cfg.train.seed = *args.seed;
      cfg.coef.seed = *args.seed;
      cfg.raw["seed"] = *args.seed;
    }
    if (args.threads) cfg.threads = *args.threads;

    const std::string command = app.get_subcommands().front()->get_name();
    sdmd::json report;
    if (command == "simulate")
      report = sdmd::run_simulate(cfg);
    else if (command == "spectrum")
      report = sdmd::run_spectrum(cfg);
    else if (command == "convergence")
      report = sdmd::run_convergence(cfg);
    else if (command == "compare")
      report = sdmd::run_compare(cfg);
    else
      report = sdmd::run_neuralmass(cfg);

    std::cout << command << " done in " << report.value("wall_clock_s", 0.0) << " s, report at "
              << cfg.output << "/report.json\n";
    return 0;
  } catch (const sdmd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 4;
  } catch (const sdmd::InvariantFailure& e) {
    std::cerr << "invariant failure: " << e.what() << '\n';
    return 2;
  } catch (const sdmd::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
