#include <CLI11.hpp>

#include <cstdint>
#include <optional>
#include <string>

#include "tfwlab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"tfwlab: periodic Thomas-Fermi-von Weizsacker laboratory for "
               "random lattices"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  bool verbose = false;
  std::uint64_t seed_value = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config file")
        ->required();
    sub->add_option("--seed", seed_value, "override the config seed");
    sub->add_flag("-v,--verbose", verbose, "verbose diagnostics");
  };

  CLI::App* solve =
      app.add_subcommand("solve", "solve one representative volume and write "
                                  "fields, energy breakdown, iteration log");
  CLI::App* mc = app.add_subcommand(
      "mc", "plain and selection Monte Carlo over representative volumes");
  CLI::App* locality = app.add_subcommand(
      "locality", "perturbation decay study: shell profiles, fits, windowed "
                  "energy differences");
  add_common(solve);
  add_common(mc);
  add_common(locality);

  CLI11_PARSE(app, argc, argv);

  for (CLI::App* sub : {solve, mc, locality})
    if (sub->parsed() && sub->count("--seed")) seed_override = seed_value;

  if (solve->parsed()) return tfw::cmd_solve(config_path, seed_override, verbose);
  if (mc->parsed()) return tfw::cmd_mc(config_path, seed_override, verbose);
  return tfw::cmd_locality(config_path, seed_override, verbose);
}
