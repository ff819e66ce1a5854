#include <algorithm>
#include <cmath>
#include <limits>

#include "common.hpp"

namespace mhbt::experiments {

double MixtureResult::mhbt_crossings_per(std::uint64_t iterations) const {
  std::uint64_t crossings = 0;
  for (const auto& v : mhbt) crossings += v.crossings;
  const double steps = static_cast<double>(mhbt_iterations) * static_cast<double>(mhbt.size());
  return steps > 0 ? static_cast<double>(crossings) * static_cast<double>(iterations) / steps : 0.0;
}

std::vector<Vector<double>> mixture_modes(const Likelihood<double>& lik, const Vector<double>& start) {
  detail::require(start.size() == 2, "mixture_modes: expected a 2-vector");
  const auto full = BatchIndex::full(static_cast<std::size_t>(lik.size()));
  Vector<double> theta = start;
  auto eval = lik.evaluate(theta, full, true);
  double step = 1.0;
  for (int it = 0; it < 20000 && step > 1e-14; ++it) {
    const Vector<double>& g = *eval.mean_grad;
    if (g.norm() < 1e-12) break;
    const Vector<double> trial = theta + step * g;
    auto next = lik.evaluate(trial, full, true);
    if (next.mean_loglik > eval.mean_loglik) {
      theta = trial;
      eval = std::move(next);
      step *= 1.5;
    } else {
      step *= 0.5;
    }
  }
  Vector<double> twin(2);
  twin << theta(0) + theta(1), -theta(1);
  return {theta, twin};
}

namespace {

using Grid = std::vector<std::vector<double>>;

struct Cell {
  std::size_t i = 0, j = 0;
};

// For each center, the highest-scoring cell among those whose midpoint lies nearer to it.
std::vector<Cell> peak_cells(const HistogramGrid& grid, const std::vector<double>& score,
                             const std::vector<Vector<double>>& centers) {
  const auto& e = grid.edges();
  const std::size_t bx = e[0].size() - 1, by = e[1].size() - 1;
  std::vector<Cell> best(centers.size());
  std::vector<double> top(centers.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < bx; ++i) {
    for (std::size_t j = 0; j < by; ++j) {
      Vector<double> mid(2);
      mid << 0.5 * (e[0][i] + e[0][i + 1]), 0.5 * (e[1][j] + e[1][j + 1]);
      std::size_t near = 0;
      for (std::size_t c = 1; c < centers.size(); ++c)
        if ((mid - centers[c]).norm() < (mid - centers[near]).norm()) near = c;
      const double s = score[i * by + j];
      if (s > top[near]) {
        top[near] = s;
        best[near] = {i, j};
      }
    }
  }
  return best;
}

bool adjacent(const Cell& a, const Cell& b) {
  auto gap = [](std::size_t x, std::size_t y) { return x > y ? x - y : y - x; };
  return gap(a.i, b.i) <= 1 && gap(a.j, b.j) <= 1;
}

}  // namespace

MixtureResult run_mixture_traveling(const Config& cfg, const RunOptions& opts) {
  const GaussianMixture2<double> mix{cfg.real("model.sigma_x_sq"), cfg.real("model.sigma1_sq"),
                                     cfg.real("model.sigma2_sq")};
  const ModelSpec<double> model = mix;
  validate(model);
  const std::size_t pairs = cfg.count("run.chains");
  const std::uint64_t iterations = cfg.count("run.iterations");
  const std::uint64_t thin = cfg.count("run.thin");
  const std::size_t threads = cfg.count("run.threads");
  const bool full_enabled = cfg.flag("full_batch.enabled");
  const std::uint64_t full_iterations = cfg.count("full_batch.iterations");
  const double fraction = cfg.real("mixture.radius_fraction");
  const int grid_bins = static_cast<int>(cfg.integer("mixture.grid_bins"));
  if (pairs < 1) throw ConfigError("run.chains must be >= 1");
  if (iterations < 1 || (full_enabled && full_iterations < 1)) throw ConfigError("iterations must be >= 1");
  if (thin < 1) throw ConfigError("run.thin must be >= 1");
  if (!(fraction > 0 && fraction < 0.5)) throw ConfigError("mixture.radius_fraction must lie in (0, 0.5)");
  if (grid_bins < 3) throw ConfigError("mixture.grid_bins must be >= 3");
  if (cfg.real("proposal.delta") < 0 || cfg.real("full_batch.delta") < 0)
    throw ConfigError("proposal deltas must be >= 0");
  const auto settings = TuneSettings::from(cfg);
  const auto theta_star = internal::vector_key(cfg, "data.theta_star", 2);
  const auto theta0 = internal::vector_key_or(cfg, "run.theta0", theta_star);
  internal::OutputDir out(cfg, opts);

  const auto data = internal::load_or_generate(cfg, model, theta_star);
  const Likelihood<double> lik(model, data);
  const std::size_t n = static_cast<std::size_t>(data.size());
  const TemperSpec spec{n, cfg.count("temper.m"), cfg.real("temper.c_n")};
  spec.validate();
  const TemperSpec full_spec = TemperSpec::full_batch(n);
  const std::uint64_t root = cfg.count("run.seed");

  MixtureResult res;
  res.mhbt_iterations = iterations;
  res.full_iterations = full_enabled ? full_iterations : 0;
  res.centers = mixture_modes(lik, theta_star);
  res.radius = fraction * (res.centers[0] - res.centers[1]).norm();
  if (!(res.radius > 1e-9))
    throw std::runtime_error("mixture-traveling: the two modes coincide; cannot define mode balls");
  out.log("mixture-traveling: modes (" + std::to_string(res.centers[0](0)) + ", " +
          std::to_string(res.centers[0](1)) + ") and (" + std::to_string(res.centers[1](0)) + ", " +
          std::to_string(res.centers[1](1)) + "), radius " + std::to_string(res.radius));

  auto tuned = [&](const TemperSpec& s, double fixed, std::uint64_t purpose, const std::string& tag) {
    if (fixed > 0) return fixed;
    const auto t = tune_step_size(lik, s, theta0, settings, internal::sub_seed(root, purpose));
    out.result(tag + "_tune_rate", t.rate);
    out.result(tag + "_tune_converged", t.converged);
    out.log("mixture-traveling: " + tag + " delta " + std::to_string(t.delta) + " (pilot rate " +
            std::to_string(t.rate) + ")");
    return t.delta;
  };
  res.delta_mhbt = tuned(spec, cfg.real("proposal.delta"), 2, "mhbt");
  if (full_enabled) res.delta_full = tuned(full_spec, cfg.real("full_batch.delta"), 3, "full");

  const auto mhbt_seeds = internal::chain_seeds(internal::sub_seed(root, 0), pairs);
  const auto full_seeds = internal::chain_seeds(internal::sub_seed(root, 1), pairs);
  auto& seeds = out.manifest().chain_seeds;
  seeds = mhbt_seeds;
  if (full_enabled) seeds.insert(seeds.end(), full_seeds.begin(), full_seeds.end());

  std::vector<ChainTrace<double>> mhbt(pairs), full(full_enabled ? pairs : 0);
  const std::size_t jobs = pairs * (full_enabled ? 2 : 1);
  internal::parallel_for(jobs, threads, [&](std::size_t job) {
    const std::size_t c = job % pairs;
    const bool is_full = job >= pairs;
    ChainConfig<double> cc;
    cc.spec = is_full ? full_spec : spec;
    cc.proposal = Proposal::random_walk(is_full ? res.delta_full : res.delta_mhbt);
    cc.theta0 = theta0;
    cc.iterations = is_full ? full_iterations : iterations;
    cc.thin = thin;
    cc.seed = is_full ? full_seeds[c] : mhbt_seeds[c];
    (is_full ? full[c] : mhbt[c]) = run_chain(lik, cc);
  });

  std::vector<std::uint64_t> pooled(2, 0);
  double acc_m = 0, acc_f = 0;
  for (std::size_t c = 0; c < pairs; ++c) {
    res.mhbt.push_back(mode_visits(mhbt[c].snapshots, res.centers, res.radius));
    acc_m += mhbt[c].acceptance_rate();
    for (std::size_t k = 0; k < 2; ++k) pooled[k] += res.mhbt.back().visits[k];
    if (full_enabled) {
      res.full.push_back(mode_visits(full[c].snapshots, res.centers, res.radius));
      acc_f += full[c].acceptance_rate();
      for (std::size_t k = 0; k < 2; ++k) pooled[k] += res.full.back().visits[k];
    }
  }
  res.accept_mhbt = acc_m / static_cast<double>(pairs);
  res.accept_full = full_enabled ? acc_f / static_cast<double>(pairs) : 0.0;
  res.pooled_covers_all = pooled[0] > 0 && pooled[1] > 0;

  // density peaks: MHBT histogram against the tempered posterior on the same grid
  std::size_t rows = 0;
  for (const auto& t : mhbt) rows += t.snapshots.size();
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(rows), 2);
  Eigen::Index r = 0;
  for (const auto& t : mhbt)
    for (const auto& s : t.snapshots) pts.row(r++) = s.theta.transpose();
  HistogramGrid hist = HistogramGrid::spanning<Eigen::MatrixXd>({&pts}, grid_bins);
  hist.add_rows(pts);
  const auto& e = hist.edges();
  const std::size_t by = e[1].size() - 1;
  std::vector<double> density(hist.cells()), posterior(hist.cells());
  const auto xs = data.features().col(0);
  const double inv_t = 1.0 / spec.temperature();
  for (std::size_t i = 0; i + 1 < e[0].size(); ++i) {
    for (std::size_t j = 0; j < by; ++j) {
      Vector<double> mid(2);
      mid << 0.5 * (e[0][i] + e[0][i + 1]), 0.5 * (e[1][j] + e[1][j + 1]);
      density[i * by + j] = static_cast<double>(hist.counts()[i * by + j]);
      posterior[i * by + j] = inv_t * mixture_log_posterior(mid, xs, mix.sigma_x_sq, mix.sigma1_sq, mix.sigma2_sq);
    }
  }
  const auto hp = peak_cells(hist, density, res.centers);
  const auto pp = peak_cells(hist, posterior, res.centers);
  res.argmax_match = adjacent(hp[0], pp[0]) && adjacent(hp[1], pp[1]);

  for (std::size_t c = 0; c < pairs; ++c) {
    out.write("trajectory_mhbt_" + std::to_string(c) + ".csv", [&](std::ostream& os) { write_trace_csv(os, mhbt[c]); });
    if (full_enabled)
      out.write("trajectory_full_" + std::to_string(c) + ".csv", [&](std::ostream& os) { write_trace_csv(os, full[c]); });
  }
  out.write("mode_visits.csv", [&](std::ostream& os) {
    os << "pair,sampler,iterations,visits_0,visits_1,unassigned,crossings\n";
    auto row = [&](std::size_t c, const char* name, std::uint64_t its, const ModeVisits& v) {
      os << c << ',' << name << ',' << its << ',' << v.visits[0] << ',' << v.visits[1] << ',' << v.unassigned << ','
         << v.crossings << '\n';
    };
    for (std::size_t c = 0; c < pairs; ++c) {
      row(c, "mhbt", iterations, res.mhbt[c]);
      if (full_enabled) row(c, "full", full_iterations, res.full[c]);
    }
  });
  out.write("modes.csv", [&](std::ostream& os) {
    os << "mode,theta_0,theta_1,radius\n";
    for (std::size_t k = 0; k < 2; ++k)
      os << k << ',' << res.centers[k](0) << ',' << res.centers[k](1) << ',' << res.radius << '\n';
  });
  out.write("density_grid.csv", [&](std::ostream& os) {
    os << "theta_0,theta_1,mhbt_count,tempered_log_posterior\n";
    for (std::size_t i = 0; i + 1 < e[0].size(); ++i)
      for (std::size_t j = 0; j < by; ++j)
        os << 0.5 * (e[0][i] + e[0][i + 1]) << ',' << 0.5 * (e[1][j] + e[1][j + 1]) << ','
           << density[i * by + j] << ',' << posterior[i * by + j] << '\n';
  });

  out.result("delta_mhbt", res.delta_mhbt);
  out.result("accept_mhbt", res.accept_mhbt);
  out.result("mhbt_crossings_per_1e4", res.mhbt_crossings_per(10000));
  if (full_enabled) {
    std::uint64_t fc = 0;
    for (const auto& v : res.full) fc += v.crossings;
    out.result("delta_full", res.delta_full);
    out.result("accept_full", res.accept_full);
    out.result("full_crossings", fc);
  }
  out.result("pooled_covers_all", res.pooled_covers_all);
  out.result("argmax_match", res.argmax_match);
  res.manifest = out.finish();
  return res;
}

}  // namespace mhbt::experiments
