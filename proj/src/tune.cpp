#include <cmath>
#include <sstream>

#include "common.hpp"
#include "mhbt/experiments/experiments.hpp"

namespace mhbt::experiments {

TuneSettings TuneSettings::from(const Config& cfg) {
  TuneSettings s;
  s.target = cfg.real("tune.target");
  s.tolerance = cfg.real("tune.tolerance");
  s.pilot_iterations = cfg.count("tune.pilot_iterations");
  s.max_steps = static_cast<int>(cfg.integer("tune.max_steps"));
  s.lo = cfg.real("tune.lo");
  s.hi = cfg.real("tune.hi");
  if (!(s.target > 0 && s.target < 1)) throw ConfigError("tune.target must lie in (0, 1)");
  if (!(s.tolerance > 0)) throw ConfigError("tune.tolerance must be positive");
  if (s.pilot_iterations < 1) throw ConfigError("tune.pilot_iterations must be >= 1");
  if (s.max_steps < 1) throw ConfigError("tune.max_steps must be >= 1");
  if (!(s.lo > 0 && s.hi > s.lo)) throw ConfigError("tune: need 0 < tune.lo < tune.hi");
  return s;
}

TuneResult tune_step_size(const Likelihood<double>& lik, const TemperSpec& spec, const Vector<double>& theta,
                          const TuneSettings& settings, std::uint64_t seed) {
  TuneResult res;
  auto pilot = [&](double delta) {
    ChainConfig<double> cfg;
    cfg.spec = spec;
    cfg.proposal = Proposal::random_walk(delta);
    cfg.theta0 = theta;
    cfg.iterations = settings.pilot_iterations;
    cfg.thin = settings.pilot_iterations;
    cfg.seed = seed;
    const double rate = run_chain(lik, cfg).acceptance_rate();
    res.path.push_back({delta, rate});
    return rate;
  };
  constexpr double kAll = 1.0 - 1e-12;

  const double r_lo = pilot(settings.lo);
  const double r_hi = pilot(settings.hi);
  double a = settings.lo, b = settings.hi;
  if (r_hi >= kAll) {
    res.delta = std::sqrt(a * b);
    res.rate = pilot(res.delta);
    res.saturated = true;
    res.converged = std::abs(res.rate - settings.target) <= settings.tolerance;
    return res;
  }
  if (r_lo < settings.target - settings.tolerance || r_hi > settings.target + settings.tolerance) {
    std::ostringstream msg;
    msg << "tune_step_size: [" << settings.lo << ", " << settings.hi << "] does not bracket acceptance "
        << settings.target << " +- " << settings.tolerance << " (rate " << r_lo << " at delta " << settings.lo
        << ", rate " << r_hi << " at delta " << settings.hi << ")";
    throw TuningError(msg.str());
  }

  double best_gap = std::numeric_limits<double>::infinity();
  for (int step = 0; step < settings.max_steps; ++step) {
    const double mid = std::sqrt(a * b);
    const double r = pilot(mid);
    const double gap = std::abs(r - settings.target);
    if (gap < best_gap) {
      best_gap = gap;
      res.delta = mid;
      res.rate = r;
    }
    if (gap <= settings.tolerance) {
      res.converged = true;
      break;
    }
    (r > settings.target ? a : b) = mid;
  }
  return res;
}

namespace {

ModelSpec<double> tune_model(const Config& cfg) {
  const auto& family = cfg.text("model.family");
  if (family == "gaussian-mean") {
    GaussianMean<double> g;
    g.dim = static_cast<Eigen::Index>(cfg.count("model.dim"));
    g.variance = cfg.real("model.variance");
    g.centered = cfg.flag("model.centered");
    return g;
  }
  if (family == "gaussian-mixture-2") {
    return GaussianMixture2<double>{cfg.real("model.sigma_x_sq"), cfg.real("model.sigma1_sq"),
                                    cfg.real("model.sigma2_sq")};
  }
  throw ConfigError("model.family: expected gaussian-mean or gaussian-mixture-2, got '" + family + "'");
}

}  // namespace

TuneDeltaResult run_tune_delta(const Config& cfg, const RunOptions& opts) {
  const auto model = tune_model(cfg);
  validate(model);
  const auto settings = TuneSettings::from(cfg);
  const TemperSpec spec_template{0, cfg.count("temper.m"), cfg.real("temper.c_n")};
  const Eigen::Index d = param_dim(model);
  const auto theta_star = internal::vector_key(cfg, "data.theta_star", d);
  internal::OutputDir out(cfg, opts);

  const auto data = internal::load_or_generate(cfg, model, theta_star);
  const Likelihood<double> lik(model, data);
  TemperSpec spec = spec_template;
  spec.n = static_cast<std::size_t>(data.size());
  spec.validate();

  Vector<double> start = theta_star;
  if (std::holds_alternative<GaussianMean<double>>(model)) {
    const Vector<double> xbar = data.features().colwise().mean().transpose();
    start = tempered_gaussian_posterior(xbar, spec.n, spec.temperature()).mean;
  }
  start = internal::vector_key_or(cfg, "tune.theta", start);

  const std::uint64_t seed = internal::sub_seed(cfg.count("run.seed"), 0);
  out.manifest().chain_seeds = {seed};
  TuneDeltaResult res;
  res.tune = tune_step_size(lik, spec, start, settings, seed);
  out.log("tune-delta: delta " + std::to_string(res.tune.delta) + " rate " + std::to_string(res.tune.rate));

  out.write("tune_path.csv", [&](std::ostream& os) {
    os << "step,delta,rate\n";
    for (std::size_t k = 0; k < res.tune.path.size(); ++k)
      os << k << ',' << res.tune.path[k].delta << ',' << res.tune.path[k].rate << '\n';
  });
  out.result("delta", res.tune.delta);
  out.result("rate", res.tune.rate);
  out.result("converged", res.tune.converged);
  out.result("saturated", res.tune.saturated);
  res.manifest = out.finish();
  return res;
}

}  // namespace mhbt::experiments
