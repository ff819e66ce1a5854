#include <algorithm>
#include <sstream>

#include "common.hpp"

namespace mhbt::experiments {

namespace {

// Comma list of positive numbers where the literal "n" stands for the dataset size.
std::vector<std::string> tokens(const Config& cfg, const std::string& key) {
  std::vector<std::string> out;
  std::stringstream ss(cfg.text(key));
  for (std::string t; std::getline(ss, t, ',');) {
    t.erase(0, t.find_first_not_of(" \t"));
    t.erase(t.find_last_not_of(" \t") + 1);
    if (!t.empty()) out.push_back(t);
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

double resolve(const std::string& token, std::size_t n, const std::string& key) {
  if (token == "n") return static_cast<double>(n);
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used == token.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected a positive number or 'n', got '" + token + "'");
}

// Symmetric nearest-neighbor walk on a line of g points; the ends hold with probability 1/2.
Eigen::MatrixXd nearest_neighbor(std::size_t g) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(g));
  if (g == 1) {
    q(0, 0) = 1;
    return q;
  }
  for (Eigen::Index a = 0; a < q.rows(); ++a) {
    q(a, a > 0 ? a - 1 : a) += 0.5;
    q(a, a + 1 < q.rows() ? a + 1 : a) += 0.5;
  }
  return q;
}

}  // namespace

OracleCheckResult run_oracle_check(const Config& cfg, const RunOptions& opts) {
  const auto ns = cfg.counts("oracle.ns");
  const auto grids = cfg.counts("oracle.grids");
  const auto m_tokens = tokens(cfg, "oracle.ms");
  const auto c_tokens = tokens(cfg, "oracle.cns");
  const double half = cfg.real("oracle.grid_halfwidth");
  const double tol = cfg.real("oracle.max_abs_tol");
  const double balance_tol = cfg.real("oracle.balance_tol");
  if (!(half > 0)) throw ConfigError("oracle.grid_halfwidth must be positive");
  for (auto g : grids)
    if (g < 2) throw ConfigError("oracle.grids: grid sizes must be >= 2");
  const auto theta_star = internal::vector_key(cfg, "data.theta_star", 1);
  internal::OutputDir out(cfg, opts);

  const ModelSpec<double> model = GaussianMean<double>{1, 1.0, false};
  OracleCheckResult res;
  res.all_pass = true;
  for (auto n : ns) {
    if (n < 1) throw ConfigError("oracle.ns: sizes must be >= 1");
    const auto data = generate_data(model, theta_star, static_cast<Eigen::Index>(n),
                                    internal::sub_seed(cfg.count("data.seed"), n));
    const Likelihood<double> lik(model, data);
    const double xbar = data.features().mean();

    std::vector<std::size_t> ms;
    for (const auto& t : m_tokens) {
      const double v = resolve(t, n, "oracle.ms");
      if (v != std::floor(v) || v > static_cast<double>(n))
        throw ConfigError("oracle.ms: batch size " + t + " is not an integer in [1, n]");
      ms.push_back(static_cast<std::size_t>(v));
    }
    std::vector<double> cns;
    for (const auto& t : c_tokens) cns.push_back(resolve(t, n, "oracle.cns"));
    std::sort(ms.begin(), ms.end());
    ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
    std::sort(cns.begin(), cns.end());
    cns.erase(std::unique(cns.begin(), cns.end()), cns.end());

    for (auto m : ms) {
      for (double c : cns) {
        for (auto g : grids) {
          DiscreteChainSpec<double> chain;
          for (std::size_t a = 0; a < g; ++a)
            chain.theta_grid.push_back(Vector<double>::Constant(
                1, xbar - half + 2 * half * static_cast<double>(a) / static_cast<double>(g - 1)));
          chain.proposal_matrix = nearest_neighbor(g);
          chain.likelihood = &lik;
          chain.spec = {n, m, c};
          const auto st = exact_stationary(chain);

          OracleInstance inst;
          inst.n = n;
          inst.m = m;
          inst.grid = g;
          inst.c_n = c;
          inst.max_abs_error = st.max_abs_error();
          inst.balance_error = st.detailed_balance_error();
          inst.marginal_error = (st.power_marginal - st.analytic_marginal).cwiseAbs().maxCoeff();
          inst.sweeps = st.sweeps;
          inst.pass = inst.max_abs_error <= tol && inst.balance_error <= balance_tol;
          res.all_pass = res.all_pass && inst.pass;
          res.instances.push_back(inst);

          std::ostringstream file;
          file << "stationary/n" << n << "_m" << m << "_c" << c << "_g" << g << ".csv";
          out.write(file.str(), [&](std::ostream& os) { write_stationary_csv(os, chain, st); });
        }
      }
    }
  }

  out.write("oracle.csv", [&](std::ostream& os) {
    os << "n,m,c_n,grid,max_abs_error,balance_error,marginal_error,sweeps,pass\n";
    for (const auto& i : res.instances)
      os << i.n << ',' << i.m << ',' << i.c_n << ',' << i.grid << ',' << i.max_abs_error << ',' << i.balance_error
         << ',' << i.marginal_error << ',' << i.sweeps << ',' << (i.pass ? 1 : 0) << '\n';
  });
  out.result("instances", res.instances.size());
  out.result("all_pass", res.all_pass);
  out.log("oracle-check: " + std::to_string(res.instances.size()) + " instances, " +
          (res.all_pass ? "all pass" : "FAILURES"));
  res.manifest = out.finish();
  return res;
}

}  // namespace mhbt::experiments
