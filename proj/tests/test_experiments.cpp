#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mhbt/experiments/config.hpp"
#include "mhbt/experiments/experiments.hpp"
#include "mhbt/experiments/manifest.hpp"
#include "mhbt/mhbt.hpp"
#include "oracles.hpp"

using namespace mhbt;
using namespace mhbt::experiments;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mhbt-test-" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Config small_oracle() {
  Config cfg = Config::defaults(Experiment::oracle_check);
  cfg.set("oracle.ns", "3");
  cfg.set("oracle.grids", "3,4");
  return cfg;
}

Config small_scaling() {
  Config cfg = Config::defaults(Experiment::acceptance_scaling);
  cfg.set("run.iterations", "50");
  cfg.set("data.n", "200");
  cfg.set("temper.m", "20");
  cfg.set("scaling.dims", "2,4");
  cfg.set("scaling.eps_per_decade", "1");
  cfg.set("scaling.eps_low", "-1");
  cfg.set("scaling.eps_high", "1");
  return cfg;
}

Config small_tune() {
  Config cfg = Config::defaults(Experiment::tune_delta);
  cfg.set("data.n", "2000");
  cfg.set("temper.m", "100");
  cfg.set("tune.pilot_iterations", "300");
  return cfg;
}

// Runs cfg into dir a, re-runs from the written manifest into dir b, and compares every
// output file byte for byte.
void check_rerun_identical(Config cfg, const std::string& name) {
  const auto a = scratch(name + "-a"), b = scratch(name + "-b");
  cfg.set("run.out", a.string());
  auto run = [](const Config& c) {
    switch (c.experiment()) {
      case Experiment::oracle_check: return run_oracle_check(c).manifest;
      case Experiment::acceptance_scaling: return run_acceptance_scaling(c).manifest;
      default: return run_tune_delta(c).manifest;
    }
  };
  const auto first = run(cfg);
  Config again = config_from_manifest(read_manifest(a / "manifest.json"));
  again.set("run.out", b.string());
  CHECK(again.hash() == cfg.hash());
  const auto second = run(again);
  REQUIRE(first.outputs == second.outputs);
  CHECK(first.results == second.results);
  CHECK(first.chain_seeds == second.chain_seeds);
  for (const auto& f : first.outputs) {
    INFO(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("every experiment round-trips through its own INI listing") {
    for (Experiment e : all_experiments()) {
      CHECK(parse_experiment(to_string(e)) == e);
      const Config d = Config::defaults(e);
      CHECK(d.values().size() == key_table(e).size());
      std::stringstream ss;
      d.write_ini(ss, true);
      const Config back = Config::from_ini(e, ss);
      CHECK(back.values() == d.values());
      CHECK(back.hash() == d.hash());
    }
    CHECK_THROWS_AS(parse_experiment("nope"), ConfigError);
  }

  TEST_CASE("INI values override defaults") {
    std::stringstream ss("[run]\nseed = 42\n[temper]\nc_n = 7.5\n");
    const Config cfg = Config::from_ini(Experiment::gaussian_convergence, ss);
    CHECK(cfg.count("run.seed") == 42);
    CHECK(cfg.real("temper.c_n") == 7.5);
    CHECK(cfg.count("temper.m") == 1000);
  }

  TEST_CASE("unknown keys and sections are rejected") {
    std::stringstream bad_key("[run]\nsed = 42\n");
    CHECK_THROWS_AS(Config::from_ini(Experiment::gaussian_convergence, bad_key), ConfigError);
    std::stringstream bad_section("[runner]\nseed = 42\n");
    CHECK_THROWS_AS(Config::from_ini(Experiment::gaussian_convergence, bad_section), ConfigError);
    Config cfg = Config::defaults(Experiment::oracle_check);
    CHECK_THROWS_AS(cfg.set("run.chains", "3"), ConfigError);
    CHECK_THROWS_AS(cfg.text("temper.c_n"), ConfigError);
  }

  TEST_CASE("typed accessors validate") {
    Config cfg = Config::defaults(Experiment::acceptance_scaling);
    CHECK(cfg.counts("scaling.dims") == std::vector<std::uint64_t>{10, 100, 1000});
    CHECK(cfg.reals("scaling.betas") == std::vector<double>{1, 2});
    CHECK(cfg.flag("model.centered"));
    cfg.set("data.n", "ten");
    CHECK_THROWS_AS(cfg.count("data.n"), ConfigError);
    cfg.set("data.n", "-5");
    CHECK_THROWS_AS(cfg.count("data.n"), ConfigError);
    cfg.set("model.centered", "maybe");
    CHECK_THROWS_AS(cfg.flag("model.centered"), ConfigError);
  }

  TEST_CASE("hash ignores output directory and thread count only") {
    Config a = Config::defaults(Experiment::mixture_traveling);
    Config b = a;
    b.set("run.out", "/elsewhere");
    b.set("run.threads", "8");
    CHECK(a.hash() == b.hash());
    b.set("run.seed", "2");
    CHECK(a.hash() != b.hash());
    CHECK(a.hash().size() == 16);
    CHECK(is_execution_only_key("run.out"));
    CHECK_FALSE(is_execution_only_key("run.seed"));
  }
}

TEST_SUITE("manifest") {
  TEST_CASE("JSON round trip") {
    RunManifest m = make_manifest(Config::defaults(Experiment::toy_nn));
    m.wall_clock_seconds = 1.25;
    m.chain_seeds = {1, 18446744073709551615ULL};
    m.substitutions = {"desk scale"};
    m.outputs = {"epochs.csv"};
    m.results = {{"final_beta", "2.5"}};
    const RunManifest back = manifest_from_json(to_json(m));
    CHECK(back.experiment == "toy-nn");
    CHECK(back.config == m.config);
    CHECK(back.config_hash == m.config_hash);
    CHECK(back.wall_clock_seconds == 1.25);
    CHECK(back.chain_seeds == m.chain_seeds);
    CHECK(back.substitutions == m.substitutions);
    CHECK(back.outputs == m.outputs);
    CHECK(back.results == m.results);
    CHECK(back.library_version == kLibraryVersion);
  }

  TEST_CASE("corrupt manifests are rejected with the field named") {
    const RunManifest m = make_manifest(Config::defaults(Experiment::oracle_check));
    const std::string good = to_json(m);
    auto expect_field = [](const std::string& text, const std::string& field) {
      try {
        manifest_from_json(text);
        FAIL("accepted a corrupt manifest");
      } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(field) != std::string::npos);
      }
    };
    auto replace = [&](const std::string& from, const std::string& to) {
      std::string s = good;
      const auto at = s.find(from);
      REQUIRE(at != std::string::npos);
      return s.replace(at, from.size(), to);
    };
    expect_field("{", "JSON");
    expect_field(replace(kManifestSchema, "other/9"), "schema");
    expect_field(replace("\"oracle-check\"", "\"oracle-chek\""), "experiment");
    expect_field(replace(m.config_hash, "0000000000000000"), "config_hash");
    expect_field(replace("\"wall_clock_seconds\": 0.0", "\"wall_clock_seconds\": \"soon\""), "wall_clock_seconds");
    expect_field(replace("\"oracle.ns\": \"3,4\"", "\"oracle.ns\": \"3,5\""), "config_hash");
    expect_field(replace("\"oracle.ns\": \"3,4\",", ""), "config.oracle.ns");
  }

  TEST_CASE("manifest files") {
    const auto dir = scratch("manifest");
    fs::create_directories(dir);
    const RunManifest m = make_manifest(Config::defaults(Experiment::tune_delta));
    write_manifest(dir / "m.json", m);
    CHECK(read_manifest(dir / "m.json").config_hash == m.config_hash);
    CHECK(config_from_manifest(m).values() == Config::defaults(Experiment::tune_delta).values());
    CHECK_THROWS_AS(read_manifest(dir / "absent.json"), IoError);
    fs::remove_all(dir);
  }
}

TEST_SUITE("harness helpers") {
  TEST_CASE("log-spaced checkpoints") {
    CHECK(log_checkpoints(400, 16) ==
          std::vector<std::uint64_t>{1, 2, 3, 5, 7, 11, 16, 24, 36, 54, 81, 121, 180, 268, 400});
    CHECK(log_checkpoints(1, 16) == std::vector<std::uint64_t>{1});
    CHECK(log_checkpoints(10, 1) == std::vector<std::uint64_t>{10});
    CHECK_THROWS_AS(log_checkpoints(0, 3), ConfigError);
  }

  TEST_CASE("epsilon grid") {
    const auto g = epsilon_grid(16, 1000, 2, -1, 1);
    REQUIRE(g.size() == 5);
    const double base = 0.5 / 1000;
    CHECK(g[0] == doctest::Approx(base / 10));
    CHECK(g[2] == doctest::Approx(base));
    CHECK(g[3] == doctest::Approx(base * std::sqrt(10.0)));
    CHECK(g[4] == doctest::Approx(base * 10));
    CHECK(epsilon_grid(10, 10000, 8, -4, 2).size() == 49);
    CHECK_THROWS_AS(epsilon_grid(10, 100, 0, -1, 1), ConfigError);
    CHECK_THROWS_AS(epsilon_grid(10, 100, 1, 1, -1), ConfigError);
  }

  TEST_CASE("cluster data") {
    const auto data = cluster_data(300, 3.0, 0.5, 4);
    CHECK(data.size() == 300);
    CHECK(data.width() == 2);
    REQUIRE(data.has_labels());
    CHECK(data.label_count() == 3);
    CHECK(cluster_data(300, 3.0, 0.5, 4) == data);
  }

  TEST_CASE("mixture modes are label-swap twins") {
    const ModelSpec<double> mix = GaussianMixture2<double>{};
    const auto data = generate_data(mix, oracle::vec({0, 4}), 5000, 3);
    const Likelihood<double> lik(mix, data);
    const auto modes = mixture_modes(lik, oracle::vec({0, 4}));
    REQUIRE(modes.size() == 2);
    CHECK(modes[1](0) == doctest::Approx(modes[0](0) + modes[0](1)));
    CHECK(modes[1](1) == doctest::Approx(-modes[0](1)));
    CHECK(std::abs(modes[0](0)) < 0.2);
    CHECK(std::abs(modes[0](1) - 4) < 0.2);
  }
}

TEST_SUITE("step-size tuning") {
  TEST_CASE("reaches the target band at the default Gaussian setting") {
    const Config cfg = Config::defaults(Experiment::tune_delta);
    RunOptions opts;
    opts.write_outputs = false;
    const auto res = run_tune_delta(cfg, opts).tune;
    CHECK(res.converged);
    CHECK(std::abs(res.rate - 0.3) <= 0.05);
    CHECK(res.delta > 0);
  }

  TEST_CASE("pilot acceptance falls as delta grows") {
    // centered records and a start at the origin keep batch noise out of the pilots
    const ModelSpec<double> model = GaussianMean<double>{2, 1.0, true};
    const auto data = generate_data(model, oracle::vec({0, 0}), 2000, 2);
    const Likelihood<double> lik(model, data);
    TuneSettings s;
    s.pilot_iterations = 500;
    const auto res = tune_step_size(lik, {2000, 100, 20.0}, oracle::vec({0, 0}), s, 5);
    CHECK(res.converged);
    auto path = res.path;
    std::sort(path.begin(), path.end(), [](auto a, auto b) { return a.delta < b.delta; });
    for (std::size_t k = 1; k < path.size(); ++k) CHECK(path[k].rate <= path[k - 1].rate + 1e-12);
  }

  TEST_CASE("flat targets saturate instead of failing") {
    const ModelSpec<double> model = GaussianMean<double>{1, 1.0, false};
    const auto data = oracle::scalar_data({0.0, 0.0, 0.0, 0.0});
    const Likelihood<double> lik(model, data);
    TuneSettings s;
    s.pilot_iterations = 50;
    // c_n so small that every proposal within the bracket is accepted
    const auto res = tune_step_size(lik, {4, 2, 1e-300}, oracle::vec({0.0}), s, 1);
    CHECK(res.saturated);
  }

  TEST_CASE("an unbracketed target raises TuningError") {
    const ModelSpec<double> model = GaussianMean<double>{1, 1.0, false};
    const auto data = generate_data(model, oracle::vec({0.0}), 1000, 2);
    const Likelihood<double> lik(model, data);
    TuneSettings s;
    s.pilot_iterations = 200;
    s.lo = 10;
    s.hi = 100;
    CHECK_THROWS_AS(tune_step_size(lik, {1000, 100, 20.0}, oracle::vec({0.0}), s, 1), TuningError);
  }
}

TEST_SUITE("experiment runs") {
  TEST_CASE("small oracle check passes") {
    RunOptions opts;
    opts.write_outputs = false;
    const auto res = run_oracle_check(small_oracle(), opts);
    CHECK(res.all_pass);
    CHECK(res.instances.size() == 18);
  }

  TEST_CASE("small acceptance scaling covers the grid") {
    RunOptions opts;
    opts.write_outputs = false;
    const auto res = run_acceptance_scaling(small_scaling(), opts);
    // two dims, three variants, three epsilons
    CHECK(res.cells.size() == 18);
    CHECK(res.summaries.size() == 6);
    for (const auto& c : res.cells) {
      CHECK(c.mean_accept >= 0);
      CHECK(c.mean_accept <= 1);
    }
  }

  TEST_CASE("re-running from a manifest reproduces every output byte for byte") {
    check_rerun_identical(small_oracle(), "oracle");
    check_rerun_identical(small_scaling(), "scaling");
    check_rerun_identical(small_tune(), "tune");
  }

  TEST_CASE("results do not depend on the thread count") {
    RunOptions opts;
    opts.write_outputs = false;
    Config one = small_scaling(), four = small_scaling();
    four.set("run.threads", "4");
    const auto a = run_acceptance_scaling(one, opts), b = run_acceptance_scaling(four, opts);
    CHECK(a.manifest.results == b.manifest.results);
    REQUIRE(a.cells.size() == b.cells.size());
    for (std::size_t k = 0; k < a.cells.size(); ++k) CHECK(a.cells[k].mean_accept == b.cells[k].mean_accept);
  }
}
