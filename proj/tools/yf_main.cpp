// yf: quantum-limited force-sensing simulator and estimator.
//
//   yf theory    closed-form sensitivity curves over cooperativity
//   yf sweep     synthesize + fit + calibrate across a cooperativity grid
//   yf phase     phase-space ensembles with covariance ellipses
//   yf validate  run the self-validation suite (nonzero exit on failure)
//
// Seed precedence: --seed, then an explicit synthesis.seed in the config
// file, then the YF_SEED environment variable, then the built-in default.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>

#include "yoctoforce/yoctoforce.hpp"

int main(int argc, char** argv) {
  CLI::App app{"quantum-limited force sensing: simulate, fit, calibrate"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  bool no_plots = false;

  app.add_option("-c,--config", config_path, "configuration file (key = value)");
  app.add_option("-o,--out", out_dir, "output directory (default: config output.dir)");
  app.add_option("-s,--seed", seed_flag, "random seed (overrides config and YF_SEED)")
      ->each([&](const std::string&) { seed_given = true; });
  app.add_flag("--no-plots", no_plots, "skip SVG plot output");

  auto* cmd_theory = app.add_subcommand("theory", "closed-form sensitivity curves");
  auto* cmd_sweep = app.add_subcommand("sweep", "synthesize and fit across cooperativities");
  auto* cmd_phase = app.add_subcommand("phase", "phase-space ensembles and ellipses");
  auto* cmd_validate = app.add_subcommand("validate", "run the self-validation suite");
  // Accept the global options in either position: `yf -s 7 sweep` and
  // `yf sweep -s 7` are the same invocation.
  for (auto* sub : {cmd_theory, cmd_sweep, cmd_phase, cmd_validate})
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    yf::RunConfig cfg = config_path.empty() ? yf::RunConfig{}
                                            : yf::RunConfig::from_file(config_path);

    yf::app::RunOptions opts;
    opts.out_dir = out_dir.empty() ? cfg.output_dir : out_dir;
    opts.plots = !no_plots;
    if (seed_given) {
      opts.seed = seed_flag;
    } else if (cfg.seed_explicit) {
      opts.seed = cfg.synthesis_seed;
    } else if (const char* env = std::getenv("YF_SEED")) {
      char* end = nullptr;
      const unsigned long long v = std::strtoull(env, &end, 10);
      if (end == env || *end != '\0') {
        std::cerr << "error: YF_SEED is not an unsigned integer: '" << env
                  << "'\n";
        return 2;
      }
      opts.seed = v;
    } else {
      opts.seed = cfg.synthesis_seed;
    }
    yf::app::CommandOutput out;
    if (cmd_theory->parsed()) out = yf::app::cmd_theory(cfg, opts);
    else if (cmd_sweep->parsed()) out = yf::app::cmd_sweep(cfg, opts);
    else if (cmd_phase->parsed()) out = yf::app::cmd_phase(cfg, opts);
    else if (cmd_validate->parsed()) out = yf::app::cmd_validate(cfg, opts);
    else return 2;  // unreachable: require_subcommand(1)

    std::cout << out.text;
    return out.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
