#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "ctmove/io.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "flat key = value configuration file")
      ->required();
  cmd->add_option("--out", opts.out_dir, "output directory (overrides out_dir)");
  cmd->add_option("--seed", opts.seed, "RNG seed (overrides seed)")
      ->each([&opts](const std::string&) { opts.seed_given = true; });
}

ctmove::Config load(const CommonOpts& opts) {
  ctmove::Config cfg = ctmove::Config::from_file(opts.config_path);
  if (!opts.out_dir.empty()) cfg.set("out_dir", opts.out_dir);
  if (opts.seed_given) cfg.set("seed", std::to_string(opts.seed));
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctmove: continuous-time multistate movement simulation and inference"};
  app.require_subcommand(1);

  CommonOpts sim_opts, fit_opts, sum_opts;
  CLI::App* sim = app.add_subcommand("simulate", "simulate a refined path and observations");
  add_common(sim, sim_opts);
  CLI::App* fit = app.add_subcommand("fit", "run the MCMC sampler on observations");
  add_common(fit, fit_opts);
  CLI::App* sum = app.add_subcommand("summarize", "summarize a completed fit");
  add_common(sum, sum_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return ctmove::cmd_simulate(load(sim_opts));
    if (fit->parsed()) return ctmove::cmd_fit(load(fit_opts));
    if (sum->parsed()) return ctmove::cmd_summarize(load(sum_opts));
  } catch (const ctmove::SamplerError& e) {
    std::cerr << "ctmove: sampler aborted at iteration " << e.iteration << " (" << e.component
              << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ctmove: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
