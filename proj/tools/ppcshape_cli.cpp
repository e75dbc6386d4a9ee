// ppcshape: runs one experiment family from a JSON configuration.
//   ppcshape <capacity|dslm-stats|link-sim|pas-link> --config FILE --out DIR [--seed N]
// Exit codes: 0 success, 2 configuration error, 1 runtime failure.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "ppcshape/config.hpp"
#include "ppcshape/errors.hpp"
#include "ppcshape/experiments.hpp"

namespace {

struct Args {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int run(const std::string& command, const Args& a) {
  using namespace ppcshape;
  LinkConfig cfg;
  try {
    cfg = load_config(a.config, a.seed);
    if (to_string(cfg.kind) != command)
      throw ConfigError("config kind '" + std::string(to_string(cfg.kind)) + "' does not match command '" + command + "'");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  try {
    const OutputDir out(a.out);
    const auto rec = run_experiment(cfg, out, a.quiet ? nullptr : &std::cerr);
    out.write_record(rec);
    if (!a.quiet) std::cerr << "wrote " << rec.outputs.size() << " files to " << a.out << '\n';
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Peak-power-constrained IM-DD shaping experiments"};
  app.require_subcommand(1);
  Args args;
  std::uint64_t seed = 0;
  for (const char* name : {"capacity", "dslm-stats", "link-sim", "pas-link"}) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    sub->add_option("--config", args.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory")->required();
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_flag("--quiet", args.quiet, "no progress output");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) args.seed = seed;
  return run(sub->get_name(), args);
}
