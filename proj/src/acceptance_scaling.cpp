#include <cmath>
#include <limits>

#include "common.hpp"

namespace mhbt::experiments {

std::vector<double> epsilon_grid(std::size_t dim, std::size_t n, int per_decade, double low, double high) {
  if (dim < 1 || n < 1) throw ConfigError("epsilon_grid: dim and n must be >= 1");
  if (per_decade < 1) throw ConfigError("epsilon_grid: per_decade must be >= 1");
  if (!(high >= low)) throw ConfigError("epsilon_grid: need low <= high");
  const double base = std::pow(static_cast<double>(dim), -0.25) / static_cast<double>(n);
  const auto k0 = static_cast<long>(std::ceil(low * per_decade - 1e-9));
  const auto k1 = static_cast<long>(std::floor(high * per_decade + 1e-9));
  std::vector<double> out;
  for (long k = k0; k <= k1; ++k) out.push_back(base * std::pow(10.0, static_cast<double>(k) / per_decade));
  return out;
}

namespace {

struct Variant {
  std::string name;
  double beta;
};

// Mean of min(1, r) and per-direction accept rates over `iterations` steps from the origin.
ScalingCell run_cell(const Likelihood<double>& lik, const TemperSpec& spec, const Variant& v, double eps,
                     std::uint64_t iterations, const std::vector<std::uint64_t>& seeds) {
  const auto n = static_cast<double>(spec.n);
  const Proposal p = v.name == "sgld" ? Proposal::sgld(eps, n) : Proposal::rsgld(eps, v.beta, n);
  const Vector<double> origin = Vector<double>::Zero(lik.param_dim());
  double prob = 0;
  std::uint64_t fwd = 0, fwd_acc = 0, bwd = 0, bwd_acc = 0;
  for (auto seed : seeds) {
    MhbtKernel<double> kernel(lik, spec, p);
    Rng rng(seed);
    auto state = kernel.initial_state(origin, rng);
    StepRecord<double> rec;
    for (std::uint64_t t = 0; t < iterations; ++t) {
      kernel.step_into(state, rng, rec);
      prob += std::exp(std::min(0.0, rec.log_accept_ratio));
      if (rec.direction == Direction::backward) {
        ++bwd;
        bwd_acc += rec.accepted;
      } else {
        ++fwd;
        fwd_acc += rec.accepted;
      }
    }
  }
  ScalingCell cell;
  cell.dim = static_cast<std::size_t>(lik.param_dim());
  cell.proposal = v.name;
  cell.beta = v.beta;
  cell.epsilon = eps;
  cell.mean_accept = prob / static_cast<double>(iterations * seeds.size());
  cell.forward_rate = AcceptanceWindow::ratio(fwd_acc, fwd);
  cell.backward_rate = AcceptanceWindow::ratio(bwd_acc, bwd);
  return cell;
}

}  // namespace

ScalingResult run_acceptance_scaling(const Config& cfg, const RunOptions& opts) {
  const auto dims = cfg.counts("scaling.dims");
  const auto betas = cfg.reals("scaling.betas");
  const std::size_t chains = cfg.count("run.chains");
  const std::uint64_t iterations = cfg.count("run.iterations");
  const std::size_t threads = cfg.count("run.threads");
  const auto per_decade = static_cast<int>(cfg.integer("scaling.eps_per_decade"));
  const double low = cfg.real("scaling.eps_low"), high = cfg.real("scaling.eps_high");
  if (dims.empty()) throw ConfigError("scaling.dims must list at least one dimension");
  if (chains < 1 || iterations < 1) throw ConfigError("run.chains and run.iterations must be >= 1");
  for (double b : betas)
    if (!(b >= 1)) throw ConfigError("scaling.betas: every beta must be >= 1");
  internal::OutputDir out(cfg, opts);

  std::vector<Variant> variants{{"sgld", 1.0}};
  for (double b : betas) variants.push_back({"rsgld", b});
  const std::uint64_t root = cfg.count("run.seed");

  ScalingResult res;
  for (std::size_t di = 0; di < dims.size(); ++di) {
    const auto d = static_cast<Eigen::Index>(dims[di]);
    if (d < 1) throw ConfigError("scaling.dims: dimensions must be >= 1");
    const ModelSpec<double> model = GaussianMean<double>{d, cfg.real("model.variance"), cfg.flag("model.centered")};
    validate(model);
    const Dataset<double> data =
        generate_data(model, Vector<double>(Vector<double>::Zero(d)), static_cast<Eigen::Index>(cfg.count("data.n")),
                      cfg.count("data.seed"));
    const Likelihood<double> lik(model, data);
    const TemperSpec spec{static_cast<std::size_t>(data.size()), cfg.count("temper.m"), cfg.real("temper.c_n")};
    spec.validate();
    const auto grid = epsilon_grid(dims[di], spec.n, per_decade, low, high);
    // common random numbers: every cell of this dimension reuses the same chain seeds
    const auto seeds = internal::chain_seeds(internal::sub_seed(root, di), chains);
    out.manifest().chain_seeds.insert(out.manifest().chain_seeds.end(), seeds.begin(), seeds.end());
    out.log("acceptance-scaling: d = " + std::to_string(d) + ", " + std::to_string(grid.size() * variants.size()) +
            " cells");

    std::vector<ScalingCell> cells(grid.size() * variants.size());
    internal::parallel_for(cells.size(), threads, [&](std::size_t k) {
      cells[k] = run_cell(lik, spec, variants[k / grid.size()], grid[k % grid.size()], iterations, seeds);
    });

    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
      ScalingSummary s;
      s.dim = dims[di];
      s.proposal = variants[vi].name;
      s.beta = variants[vi].beta;
      s.largest_eps_half = s.largest_eps_tenth = std::numeric_limits<double>::quiet_NaN();
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto& c = cells[vi * grid.size() + g];
        if (c.mean_accept >= 0.5) s.largest_eps_half = c.epsilon;
        if (c.mean_accept >= 0.1) s.largest_eps_tenth = c.epsilon;
      }
      res.summaries.push_back(s);
    }
    res.cells.insert(res.cells.end(), cells.begin(), cells.end());
  }

  out.write("acceptance.csv", [&](std::ostream& os) {
    os << "dim,proposal,beta,epsilon,mean_accept,forward_rate,backward_rate\n";
    for (const auto& c : res.cells)
      os << c.dim << ',' << c.proposal << ',' << c.beta << ',' << c.epsilon << ',' << c.mean_accept << ','
         << c.forward_rate << ',' << c.backward_rate << '\n';
  });
  out.write("largest_epsilon.csv", [&](std::ostream& os) {
    os << "dim,proposal,beta,largest_eps_accept_0.5,largest_eps_accept_0.1\n";
    for (const auto& s : res.summaries)
      os << s.dim << ',' << s.proposal << ',' << s.beta << ',' << s.largest_eps_half << ',' << s.largest_eps_tenth
         << '\n';
  });
  out.result("cells", res.cells.size());
  res.manifest = out.finish();
  return res;
}

}  // namespace mhbt::experiments
