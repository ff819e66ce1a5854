// Command-line harness for the desk-scale experiments.
//
//   mhbt <experiment> [--config FILE] [--seed S] [--out DIR] [--chains K] [--threads T]
//                     [--set key=value]... [--manifest FILE] [--print-defaults] [--quiet]
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mhbt/error.hpp"
#include "mhbt/experiments/config.hpp"
#include "mhbt/experiments/experiments.hpp"
#include "mhbt/experiments/manifest.hpp"

namespace {

using namespace mhbt::experiments;

struct Flags {
  std::string config;
  std::string manifest;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::uint64_t> chains;
  std::optional<std::uint64_t> threads;
  std::vector<std::string> sets;
  bool print_defaults = false;
  bool quiet = false;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "INI file layered over the defaults")->check(CLI::ExistingFile);
  sub->add_option("--manifest", f.manifest, "re-run the configuration recorded in a manifest")
      ->check(CLI::ExistingFile)
      ->excludes(sub->get_option("--config"));
  sub->add_option("--seed", f.seed, "root seed (run.seed)");
  sub->add_option("--out", f.out, "output directory (run.out)");
  sub->add_option("--chains", f.chains, "chain count (run.chains)");
  sub->add_option("--threads", f.threads, "worker threads (run.threads)");
  sub->add_option("--set", f.sets, "override one key, as section.name=value");
  sub->add_flag("--print-defaults", f.print_defaults, "print the annotated default configuration and exit");
  sub->add_flag("--quiet", f.quiet, "suppress progress lines");
}

Config resolve(Experiment e, const Flags& f) {
  Config cfg = Config::defaults(e);
  if (!f.manifest.empty()) {
    const RunManifest m = read_manifest(f.manifest);
    if (m.experiment != to_string(e))
      throw mhbt::ConfigError("manifest records experiment '" + m.experiment + "', not '" + to_string(e) + "'");
    cfg = config_from_manifest(m);
  } else if (!f.config.empty()) {
    cfg = Config::from_file(e, f.config);
  }
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw mhbt::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) cfg.set("run.seed", std::to_string(*f.seed));
  if (f.out) cfg.set("run.out", *f.out);
  if (f.threads) cfg.set("run.threads", std::to_string(*f.threads));
  if (f.chains) {
    if (!cfg.has("run.chains")) throw mhbt::ConfigError(to_string(e) + " has no chain count");
    cfg.set("run.chains", std::to_string(*f.chains));
  }
  return cfg;
}

RunManifest run(const Config& cfg, const RunOptions& opts) {
  switch (cfg.experiment()) {
    case Experiment::gaussian_convergence: return run_gaussian_convergence(cfg, opts).manifest;
    case Experiment::mixture_traveling: return run_mixture_traveling(cfg, opts).manifest;
    case Experiment::acceptance_scaling: return run_acceptance_scaling(cfg, opts).manifest;
    case Experiment::toy_nn: return run_toy_nn(cfg, opts).manifest;
    case Experiment::tune_delta: return run_tune_delta(cfg, opts).manifest;
    default: return run_oracle_check(cfg, opts).manifest;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mini-batch Metropolis-Hastings with batch tempering: experiment harness"};
  app.require_subcommand(1);
  std::map<Experiment, Flags> flags;
  std::map<Experiment, CLI::App*> subs;
  for (Experiment e : all_experiments()) {
    subs[e] = app.add_subcommand(to_string(e), "run the " + to_string(e) + " experiment");
    add_flags(subs[e], flags[e]);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  for (Experiment e : all_experiments()) {
    if (!subs[e]->parsed()) continue;
    const Flags& f = flags[e];
    try {
      const Config cfg = resolve(e, f);
      if (f.print_defaults) {
        cfg.write_ini(std::cout, true);
        return 0;
      }
      RunOptions opts;
      opts.log = f.quiet ? nullptr : &std::cerr;
      const RunManifest m = run(cfg, opts);
      for (const auto& [k, v] : m.results) std::cout << k << " = " << v << '\n';
      std::cout << "wall_clock_seconds = " << m.wall_clock_seconds << '\n'
                << "output = " << cfg.text("run.out") << '\n';
      return 0;
    } catch (const mhbt::ConfigError& err) {
      std::cerr << "config error: " << err.what() << '\n';
      return 1;
    } catch (const std::exception& err) {
      std::cerr << "error: " << err.what() << '\n';
      return 2;
    }
  }
  return 1;
}
