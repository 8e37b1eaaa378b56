#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sgdnoise/acceptance.hpp"
#include "sgdnoise/config.hpp"
#include "sgdnoise/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitAcceptance = 3;

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  bool plots = false;
  std::vector<int> criteria;
};

int run_scenario_command(const std::string& name, const Flags& flags) {
  const auto cfg = sgdnoise::load_scenario_config(flags.config);
  if (sgdnoise::to_string(cfg.scenario) != name) {
    throw sgdnoise::ConfigError("$.scenario", "config describes '" + sgdnoise::to_string(cfg.scenario) +
                                                  "' but the '" + name + "' subcommand was used");
  }
  sgdnoise::RunSettings settings;
  if (!flags.out.empty()) settings.output_dir = flags.out;
  settings.seed = flags.seed;
  settings.threads = flags.threads;
  settings.plots = flags.plots;
  const auto result = sgdnoise::run_scenario(cfg, settings);
  for (const auto& f : result.files) std::cout << (result.output_dir / f).string() << '\n';
  if (result.diverged) {
    std::cerr << name << ": a trajectory diverged\n";
    return kExitDiverged;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulations of SGD batch noise and weight averaging on quadratic models"};
  app.require_subcommand(1);
  Flags flags;

  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "Output directory (overrides output_dir)");
    sub->add_option("--seed", flags.seed, "Master seed; replaces the seeds with N, N+1, ...");
    sub->add_option("--threads", flags.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--plots", flags.plots, "Also write SVG line plots");
  };

  for (const auto& name : sgdnoise::scenario_names()) {
    auto* sub = app.add_subcommand(name, "Run the " + name + " scenario");
    add_run_flags(sub);
  }
  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("--config", flags.config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
  auto* all = app.add_subcommand("all", "Run the acceptance suite");
  all->add_option("--threads", flags.threads, "Worker threads")->check(CLI::PositiveNumber);
  all->add_option("--criterion", flags.criteria, "Run only these criteria (1-9)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "validate") {
      const auto cfg = sgdnoise::load_scenario_config(flags.config);
      std::cout << "ok: " << sgdnoise::to_string(cfg.scenario) << " (" << cfg.seeds.size() << " seed(s))\n";
      return kExitOk;
    }
    if (name == "all") {
      sgdnoise::AcceptanceOptions opts;
      opts.threads = flags.threads;
      return sgdnoise::run_acceptance(std::cout, flags.criteria, opts) ? kExitOk : kExitAcceptance;
    }
    return run_scenario_command(name, flags);
  } catch (const sgdnoise::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
