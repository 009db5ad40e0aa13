#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "qmaxwell/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Quantum Maxwellian solver on the 1-torus"};
  app.set_version_flag("--version", qmx::kVersion);
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  struct Entry {
    const char* name;
    const char* help;
  };
  const Entry commands[] = {
      {"solve", "Two-moment minimizer at the configured T, or energy matching for an e0 target"},
      {"verify", "Temperature scan, energy-entropy relation and randomized inequality suite"},
      {"scan", "Temperature scan only"},
      {"match-energy", "Find the temperature T0 whose minimizer has energy e0"},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory (overrides output.directory)");
    sub->add_option("--seed", seed, "Seed for randomized suites (overrides lab.seed)");
    sub->add_option("--threads", threads, "Worker threads, 0 = auto (overrides threads)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qmx::kExitConfig;
  }

  CLI::App* chosen = app.get_subcommands().front();
  qmx::CliOverrides overrides;
  if (chosen->count("--out")) overrides.out = out;
  if (chosen->count("--seed")) overrides.seed = seed;
  if (chosen->count("--threads")) overrides.threads = threads;
  return qmx::run_command(chosen->get_name(), config, overrides);
}
