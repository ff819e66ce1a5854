#include <algorithm>
#include <cmath>

#include "common.hpp"

namespace mhbt::experiments {

std::vector<std::uint64_t> log_checkpoints(std::uint64_t last, std::size_t count) {
  if (last == 0) throw ConfigError("log_checkpoints: last iteration must be >= 1");
  if (count < 2) return {last};
  std::vector<std::uint64_t> out;
  const double top = std::log(static_cast<double>(last));
  for (std::size_t k = 0; k < count; ++k) {
    const double x = std::exp(top * static_cast<double>(k) / static_cast<double>(count - 1));
    auto it = std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::llround(x)), 1, last);
    if (out.empty() || it > out.back()) out.push_back(it);
  }
  if (out.back() != last) out.push_back(last);
  return out;
}

namespace {

using Samples = std::vector<Eigen::MatrixXd>;  // one chains-by-d matrix per checkpoint

struct ChainBatch {
  Samples samples;
  double accept = 0;
};

ChainBatch run_batch(const Likelihood<double>& lik, const TemperSpec& spec, double delta,
                     const Vector<double>& theta0, const std::vector<std::uint64_t>& checkpoints,
                     const std::vector<std::uint64_t>& seeds, std::size_t threads) {
  const std::size_t k = seeds.size();
  const Eigen::Index d = theta0.size();
  ChainBatch out;
  out.samples.assign(checkpoints.size(), Eigen::MatrixXd(static_cast<Eigen::Index>(k), d));
  std::vector<std::uint64_t> accepted(k, 0);
  const std::uint64_t last = checkpoints.back();
  internal::parallel_for(k, threads, [&](std::size_t c) {
    MhbtKernel<double> kernel(lik, spec, Proposal::random_walk(delta));
    Rng rng(seeds[c]);
    auto state = kernel.initial_state(theta0, rng);
    StepRecord<double> rec;
    std::size_t next = 0;
    for (std::uint64_t t = 1; t <= last; ++t) {
      kernel.step_into(state, rng, rec);
      accepted[c] += rec.accepted;
      if (t == checkpoints[next]) out.samples[next++].row(static_cast<Eigen::Index>(c)) = state.theta.transpose();
    }
  });
  std::uint64_t total = 0;
  for (auto a : accepted) total += a;
  out.accept = static_cast<double>(total) / static_cast<double>(k * last);
  return out;
}

Eigen::VectorXd column_variance(const Eigen::MatrixXd& s) {
  const Eigen::RowVectorXd mean = s.colwise().mean();
  return ((s.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(s.rows() - 1)).transpose();
}

}  // namespace

GaussianConvergenceResult run_gaussian_convergence(const Config& cfg, const RunOptions& opts) {
  const auto d = static_cast<Eigen::Index>(cfg.count("model.dim"));
  const std::size_t chains = cfg.count("run.chains");
  const std::uint64_t iterations = cfg.count("run.iterations");
  const std::size_t threads = cfg.count("run.threads");
  const int bins = static_cast<int>(cfg.integer("tv.bins"));
  if (chains < 2) throw ConfigError("run.chains must be >= 2");
  if (iterations < 1) throw ConfigError("run.iterations must be >= 1");
  if (bins < 3) throw ConfigError("tv.bins must be >= 3");
  if (cfg.real("proposal.delta") < 0) throw ConfigError("proposal.delta must be >= 0");
  const auto settings = TuneSettings::from(cfg);
  const ModelSpec<double> model = GaussianMean<double>{d, 1.0, false};
  validate(model);
  const auto theta_star = internal::vector_key(cfg, "data.theta_star", d);
  const auto theta0 = internal::vector_key(cfg, "run.theta0", d);
  internal::OutputDir out(cfg, opts);

  const auto data = internal::load_or_generate(cfg, model, theta_star);
  const Likelihood<double> lik(model, data);
  const TemperSpec spec{static_cast<std::size_t>(data.size()), cfg.count("temper.m"), cfg.real("temper.c_n")};
  spec.validate();
  const Vector<double> xbar = data.features().colwise().mean().transpose();
  const auto target = tempered_gaussian_posterior(xbar, spec.n, spec.temperature());

  const std::uint64_t root = cfg.count("run.seed");
  GaussianConvergenceResult res;
  res.target_variance = target.variance;
  res.reference_mean = target.mean;
  res.delta = cfg.real("proposal.delta");
  if (res.delta == 0) {
    const auto tuned = tune_step_size(lik, spec, target.mean, settings, internal::sub_seed(root, 3));
    res.delta = tuned.delta;
    out.result("tune_rate", tuned.rate);
    out.result("tune_converged", tuned.converged);
    out.log("gaussian-convergence: tuned delta " + std::to_string(res.delta) + " (pilot rate " +
            std::to_string(tuned.rate) + ")");
  }

  res.checkpoints = log_checkpoints(iterations, cfg.count("tv.checkpoints"));
  const auto mhbt_seeds = internal::chain_seeds(internal::sub_seed(root, 0), chains);
  const bool full = cfg.flag("full_batch.enabled");
  const auto full_seeds = full ? internal::chain_seeds(internal::sub_seed(root, 1), chains)
                               : std::vector<std::uint64_t>{};
  auto& seeds = out.manifest().chain_seeds;
  seeds = mhbt_seeds;
  seeds.insert(seeds.end(), full_seeds.begin(), full_seeds.end());
  if (chains < 100000)
    out.manifest().substitutions.push_back("run.chains = " + std::to_string(chains) +
                                           " independent chains per sampler (published: 1e5)");

  std::size_t ref_count = cfg.count("tv.reference_samples");
  if (ref_count == 0) ref_count = chains;
  Eigen::MatrixXd reference(static_cast<Eigen::Index>(ref_count), d);
  {
    Rng rng(internal::sub_seed(root, 2));
    const double sd = std::sqrt(target.variance);
    for (Eigen::Index i = 0; i < reference.rows(); ++i)
      for (Eigen::Index j = 0; j < d; ++j) reference(i, j) = target.mean(j) + sd * rng.normal();
  }

  out.log("gaussian-convergence: " + std::to_string(chains) + " MHBT chains x " + std::to_string(iterations) +
          " iterations");
  const auto mhbt = run_batch(lik, spec, res.delta, theta0, res.checkpoints, mhbt_seeds, threads);
  res.accept_mhbt = mhbt.accept;
  for (const auto& s : mhbt.samples) res.tv_mhbt.push_back(tv_distance_samples(s, reference, bins));
  res.variance_mhbt = column_variance(mhbt.samples.back());

  if (full) {
    out.log("gaussian-convergence: full-batch chains");
    const TemperSpec full_spec{spec.n, spec.n, spec.c_n};
    const auto fb = run_batch(lik, full_spec, res.delta, theta0, res.checkpoints, full_seeds, threads);
    res.accept_full = fb.accept;
    for (const auto& s : fb.samples) res.tv_full.push_back(tv_distance_samples(s, reference, bins));
    res.variance_full = column_variance(fb.samples.back());
  }

  auto series = [&](const std::vector<double>& tv) {
    std::vector<TvPoint> pts;
    for (std::size_t i = 0; i < tv.size(); ++i) pts.push_back({res.checkpoints[i], tv[i]});
    return pts;
  };
  out.write("tv_mhbt.csv", [&](std::ostream& os) { write_tv_csv(os, series(res.tv_mhbt)); });
  if (full) out.write("tv_full.csv", [&](std::ostream& os) { write_tv_csv(os, series(res.tv_full)); });
  out.write("variance.csv", [&](std::ostream& os) {
    os << "coordinate,target,mhbt" << (full ? ",full" : "") << '\n';
    for (Eigen::Index j = 0; j < d; ++j) {
      os << j << ',' << res.target_variance << ',' << res.variance_mhbt(j);
      if (full) os << ',' << res.variance_full(j);
      os << '\n';
    }
  });

  std::string cps;
  for (auto c : res.checkpoints) cps += (cps.empty() ? "" : ",") + std::to_string(c);
  out.result("checkpoints", cps);
  out.result("delta", res.delta);
  out.result("accept_mhbt", res.accept_mhbt);
  out.result("tv_mhbt_final", res.tv_mhbt.back());
  if (full) {
    out.result("accept_full", res.accept_full);
    out.result("tv_full_final", res.tv_full.back());
  }
  out.result("target_variance", res.target_variance);
  out.result("tv_bins", bins);
  res.manifest = out.finish();
  return res;
}

}  // namespace mhbt::experiments
