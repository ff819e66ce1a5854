#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mhbt/batch.hpp"
#include "mhbt/error.hpp"
#include "mhbt/model.hpp"
#include "mhbt/numeric.hpp"
#include "mhbt/rng.hpp"
#include "mhbt/sampler.hpp"

namespace mhbt {

// ---- closed forms --------------------------------------------------------------------

template <typename Scalar = double>
struct GaussianPosterior {
  Vector<Scalar> mean;
  Scalar variance = 1;  ///< per coordinate
};

/// N(0, I) prior, unit-variance Gaussian likelihood, posterior raised to 1/T:
/// mean n/(n+1) xbar, variance T/(n+1).
template <typename Scalar>
GaussianPosterior<Scalar> tempered_gaussian_posterior(const Vector<Scalar>& sample_mean,
                                                      std::size_t n, Scalar temperature) {
  detail::require(n >= 1, "tempered_gaussian_posterior: n must be >= 1");
  detail::require(temperature > 0, "tempered_gaussian_posterior: temperature must be positive");
  const auto np1 = static_cast<Scalar>(n) + Scalar(1);
  return {(static_cast<Scalar>(n) / np1) * sample_mean, temperature / np1};
}

/// Unnormalized log posterior of the two-component mixture with its Gaussian prior:
/// -(t1^2/s1^2 + t2^2/s2^2)/2 + sum_i log(exp(-(t1^2 - 2 t1 x)/(2 sx^2)) + exp(-((t1+t2)^2 - 2 (t1+t2) x)/(2 sx^2))).
template <typename Scalar, typename Derived>
Scalar mixture_log_posterior(const Vector<Scalar>& theta, const Eigen::MatrixBase<Derived>& xs,
                             Scalar sigma_x_sq, Scalar sigma1_sq, Scalar sigma2_sq) {
  detail::require_config(sigma_x_sq > 0 && sigma1_sq > 0 && sigma2_sq > 0,
                         "mixture_log_posterior: variances must be positive");
  detail::require(theta.size() == 2, detail::size_mismatch("theta", 2, static_cast<long>(theta.size())));
  const Scalar t1 = theta(0);
  const Scalar t12 = theta(0) + theta(1);
  Scalar total = Scalar(-0.5) * (t1 * t1 / sigma1_sq + theta(1) * theta(1) / sigma2_sq);
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    const Scalar x = xs(i);
    total += log_add_exp(-(t1 * t1 - 2 * t1 * x) / (2 * sigma_x_sq),
                         -(t12 * t12 - 2 * t12 * x) / (2 * sigma_x_sq));
  }
  return total;
}

// ---- subset enumeration --------------------------------------------------------------

/// All m-subsets of [0, n) in revolving-door order: consecutive subsets differ by
/// exchanging one element, so running sums update in O(1).
class RevolvingDoor {
 public:
  RevolvingDoor(std::size_t n, std::size_t m) : n_(n), t_(m), c_(m + 3) {
    detail::require(m >= 1 && m <= n, "RevolvingDoor: need 1 <= m <= n");
    for (std::size_t j = 1; j <= t_; ++j) c_[j] = j - 1;
    c_[t_ + 1] = n_;
    c_[t_ + 2] = n_ + 1;
  }

  /// Current subset, ascending.
  std::vector<BatchIndex::value_type> current() const {
    std::vector<BatchIndex::value_type> out(t_);
    for (std::size_t j = 1; j <= t_; ++j) out[j - 1] = static_cast<BatchIndex::value_type>(c_[j]);
    return out;
  }

  /// Advances; returns false after the last subset. On success `removed` left the set
  /// and `added` joined it.
  bool next(std::size_t& removed, std::size_t& added) {
    if (t_ == n_) return false;
    if (t_ == 1) {
      if (c_[1] + 1 >= n_) return false;
      removed = c_[1]++;
      added = c_[1];
      return true;
    }
    std::size_t j = 2;
    bool try_decrease = true;
    if (t_ % 2 == 1) {
      if (c_[1] + 1 < c_[2]) {
        removed = c_[1]++;
        added = c_[1];
        return true;
      }
    } else {
      if (c_[1] > 0) {
        removed = c_[1]--;
        added = c_[1];
        return true;
      }
      try_decrease = false;
    }
    for (;;) {
      if (try_decrease) {
        // here c_j = c_{j-1} + 1
        if (c_[j] >= j) {
          removed = c_[j];
          added = j - 2;
          c_[j] = c_[j - 1];
          c_[j - 1] = j - 2;
          return true;
        }
        ++j;
      }
      // here c_{j-1} = j - 2
      if (c_[j] + 1 < c_[j + 1]) {
        removed = c_[j - 1];
        added = c_[j] + 1;
        c_[j - 1] = c_[j];
        c_[j] += 1;
        return true;
      }
      ++j;
      if (j > t_) return false;
      try_decrease = true;
    }
  }

 private:
  std::size_t n_, t_;
  std::vector<std::size_t> c_;
};

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
}

/// Every m-subset of [0, n), in revolving-door order.
inline std::vector<BatchIndex> enumerate_batches(std::size_t n, std::size_t m) {
  std::vector<BatchIndex> out;
  RevolvingDoor door(n, m);
  std::size_t removed = 0, added = 0;
  do {
    out.emplace_back(door.current(), n);
  } while (door.next(removed, added));
  return out;
}

// ---- bias term -----------------------------------------------------------------------

struct BiasEstimate {
  double value = 1;           ///< U(theta)
  double log_value = 0;       ///< log U(theta)
  double standard_error = 0;  ///< zero in exact mode
  bool exact = true;
  std::uint64_t subsets = 0;
};

/// Per-record log-likelihoods at theta.
template <typename Scalar>
Vector<Scalar> record_logliks(const Likelihood<Scalar>& lik, const Vector<Scalar>& theta) {
  Vector<Scalar> ll(lik.size());
  for (Eigen::Index i = 0; i < lik.size(); ++i) ll(i) = log_lik(lik.model(), theta, lik.data(), i);
  return ll;
}

constexpr double kExactEnumerationLimit = 1e6;

/// U(theta) = C(n,m)^{-1} sum_I exp(c_n (muhat_I(theta) - mu(theta))).
///
/// Exact enumeration when C(n,m) <= 1e6; otherwise `monte_carlo_draws` uniformly sampled
/// subsets must be requested explicitly.
template <typename Scalar>
BiasEstimate bias_term_U(const Likelihood<Scalar>& lik, const Vector<Scalar>& theta,
                         const TemperSpec& spec, std::uint64_t monte_carlo_draws = 0,
                         std::uint64_t seed = 0) {
  spec.validate();
  detail::require(static_cast<Eigen::Index>(spec.n) == lik.size(), "bias_term_U: spec.n != dataset size");
  const Vector<Scalar> ll = record_logliks(lik, theta);
  const double mu = static_cast<double>(ll.mean());
  const double m = static_cast<double>(spec.m);
  const double count = binomial(spec.n, spec.m);
  BiasEstimate out;

  if (monte_carlo_draws == 0) {
    detail::require(count <= kExactEnumerationLimit,
                    "bias_term_U: C(n,m) = " + std::to_string(count) +
                        " exceeds the exact enumeration limit; request Monte Carlo draws");
    RevolvingDoor door(spec.n, spec.m);
    double sum = 0;
    for (auto i : door.current()) sum += static_cast<double>(ll(i));
    std::vector<double> exponents;
    exponents.reserve(static_cast<std::size_t>(count));
    std::size_t removed = 0, added = 0;
    do {
      exponents.push_back(spec.c_n * (sum / m - mu));
      if (!door.next(removed, added)) break;
      sum += static_cast<double>(ll(static_cast<Eigen::Index>(added)) - ll(static_cast<Eigen::Index>(removed)));
    } while (true);
    const Eigen::Map<const Eigen::VectorXd> e(exponents.data(), static_cast<Eigen::Index>(exponents.size()));
    out.log_value = log_sum_exp(e) - std::log(static_cast<double>(exponents.size()));
    out.value = std::exp(out.log_value);
    out.subsets = exponents.size();
    return out;
  }

  Rng rng(seed);
  BatchSampler sampler(spec.n, spec.m);
  BatchIndex batch;
  Eigen::VectorXd e(static_cast<Eigen::Index>(monte_carlo_draws));
  for (std::uint64_t s = 0; s < monte_carlo_draws; ++s) {
    sampler.draw(rng, batch);
    double sum = 0;
    for (auto i : batch) sum += static_cast<double>(ll(i));
    e(static_cast<Eigen::Index>(s)) = spec.c_n * (sum / m - mu);
  }
  out.exact = false;
  out.subsets = monte_carlo_draws;
  out.log_value = log_sum_exp(e) - std::log(static_cast<double>(monte_carlo_draws));
  out.value = std::exp(out.log_value);
  const Eigen::ArrayXd w = e.array().exp();
  const double var = monte_carlo_draws > 1
                         ? (w - w.mean()).square().sum() / static_cast<double>(monte_carlo_draws - 1)
                         : 0.0;
  out.standard_error = std::sqrt(var / static_cast<double>(monte_carlo_draws));
  return out;
}

/// log of the marginal stationary density up to a constant: c_n mu(theta) + log U(theta).
template <typename Scalar>
double marginal_tilde_pi(const Likelihood<Scalar>& lik, const Vector<Scalar>& theta,
                         const TemperSpec& spec, std::uint64_t monte_carlo_draws = 0,
                         std::uint64_t seed = 0) {
  const double mu = static_cast<double>(record_logliks(lik, theta).mean());
  return spec.c_n * mu + bias_term_U(lik, theta, spec, monte_carlo_draws, seed).log_value;
}

// ---- exact stationary distribution of a discretized chain ----------------------------

template <typename Scalar = double>
struct DiscreteChainSpec {
  std::vector<Vector<Scalar>> theta_grid;
  Eigen::MatrixXd proposal_matrix;  ///< row-stochastic over grid states
  const Likelihood<Scalar>* likelihood = nullptr;
  TemperSpec spec;
};

struct StationaryResult {
  Eigen::MatrixXd transition;  ///< augmented states, index = grid * batches + batch
  Eigen::VectorXd power;       ///< power-iterated stationary vector
  Eigen::VectorXd analytic;    ///< normalized exp(c_n muhat_I(theta)) on the grid
  Eigen::VectorXd power_marginal;
  Eigen::VectorXd analytic_marginal;
  std::vector<BatchIndex> batches;
  std::size_t grid_size = 0;
  double residual = 0;
  std::uint64_t sweeps = 0;

  std::size_t state(std::size_t grid, std::size_t batch) const { return grid * batches.size() + batch; }
  double max_abs_error() const { return (power - analytic).cwiseAbs().maxCoeff(); }
  double detailed_balance_error() const {
    const Eigen::MatrixXd flow = analytic.asDiagonal() * transition;
    return (flow - flow.transpose()).cwiseAbs().maxCoeff();
  }
};

namespace detail {

/// Grid states not reachable from state 0 or unable to return to it.
inline std::vector<std::size_t> unreachable_states(const Eigen::MatrixXd& q) {
  const auto g = static_cast<std::size_t>(q.rows());
  auto sweep = [&](bool forward) {
    std::vector<bool> seen(g, false);
    std::queue<std::size_t> todo;
    seen[0] = true;
    todo.push(0);
    while (!todo.empty()) {
      const auto a = todo.front();
      todo.pop();
      for (std::size_t b = 0; b < g; ++b) {
        const double w = forward ? q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))
                                 : q(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a));
        if (w > 0 && !seen[b]) {
          seen[b] = true;
          todo.push(b);
        }
      }
    }
    return seen;
  };
  const auto fwd = sweep(true);
  const auto bwd = sweep(false);
  std::vector<std::size_t> bad;
  for (std::size_t s = 0; s < g; ++s)
    if (!fwd[s] || !bwd[s]) bad.push_back(s);
  return bad;
}

}  // namespace detail

/// Builds the full MHBT transition matrix over (grid point, batch) pairs, power-iterates
/// it to its stationary vector and compares with exp(c_n muhat_I(theta)) normalized.
template <typename Scalar>
StationaryResult exact_stationary(const DiscreteChainSpec<Scalar>& chain,
                                  double tolerance = 1e-14, std::uint64_t max_sweeps = 10'000'000) {
  detail::require(chain.likelihood != nullptr, "exact_stationary: likelihood not set");
  chain.spec.validate();
  const auto& lik = *chain.likelihood;
  const std::size_t g = chain.theta_grid.size();
  detail::require(g >= 1, "exact_stationary: empty grid");
  detail::require(chain.proposal_matrix.rows() == static_cast<Eigen::Index>(g) &&
                      chain.proposal_matrix.cols() == static_cast<Eigen::Index>(g),
                  "exact_stationary: proposal matrix must be grid x grid");
  for (Eigen::Index r = 0; r < chain.proposal_matrix.rows(); ++r) {
    detail::require((chain.proposal_matrix.row(r).array() >= 0).all(),
                    "exact_stationary: negative proposal probability in row " + std::to_string(r));
    detail::require(std::abs(chain.proposal_matrix.row(r).sum() - 1.0) < 1e-12,
                    "exact_stationary: proposal row " + std::to_string(r) + " does not sum to 1");
  }
  const auto bad = detail::unreachable_states(chain.proposal_matrix);
  if (!bad.empty()) {
    std::string names;
    for (auto s : bad) names += (names.empty() ? "" : ", ") + std::to_string(s);
    throw ContractViolation("exact_stationary: proposal is not irreducible; unreachable grid states: " + names);
  }

  StationaryResult res;
  res.batches = enumerate_batches(chain.spec.n, chain.spec.m);
  res.grid_size = g;
  const std::size_t nb = res.batches.size();
  const std::size_t ns = g * nb;
  detail::require(ns <= 10'000, "exact_stationary: more than 1e4 augmented states");

  Eigen::VectorXd score(static_cast<Eigen::Index>(ns));
  for (std::size_t a = 0; a < g; ++a)
    for (std::size_t b = 0; b < nb; ++b)
      score(static_cast<Eigen::Index>(res.state(a, b))) =
          chain.spec.c_n * static_cast<double>(lik.evaluate(chain.theta_grid[a], res.batches[b], false).mean_loglik);

  const Eigen::MatrixXd& q = chain.proposal_matrix;
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(ns));
  const double nu = 1.0 / static_cast<double>(nb);
  for (std::size_t a = 0; a < g; ++a) {
    for (std::size_t b = 0; b < nb; ++b) {
      const auto s = static_cast<Eigen::Index>(res.state(a, b));
      double off = 0;
      for (std::size_t a2 = 0; a2 < g; ++a2) {
        const double fwd = q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a2));
        if (fwd == 0) continue;
        const double rev = q(static_cast<Eigen::Index>(a2), static_cast<Eigen::Index>(a));
        for (std::size_t b2 = 0; b2 < nb; ++b2) {
          const auto s2 = static_cast<Eigen::Index>(res.state(a2, b2));
          if (s2 == s) continue;
          const double log_r = rev > 0 ? std::log(rev) - std::log(fwd) + score(s2) - score(s)
                                       : -std::numeric_limits<double>::infinity();
          const double prob = fwd * nu * std::exp(std::min(0.0, log_r));
          p(s, s2) = prob;
          off += prob;
        }
      }
      p(s, s) = 1.0 - off;
    }
  }
  res.transition = p;

  res.analytic = (score.array() - score.maxCoeff()).exp();
  res.analytic /= res.analytic.sum();

  // lazy chain (I + P)/2 shares the stationary vector and is aperiodic
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Constant(static_cast<Eigen::Index>(ns), 1.0 / static_cast<double>(ns));
  Eigen::RowVectorXd next(v.size());
  for (res.sweeps = 0; res.sweeps < max_sweeps; ++res.sweeps) {
    next.noalias() = v * p;
    res.residual = (next - v).cwiseAbs().maxCoeff();
    v = 0.5 * (v + next);
    v /= v.sum();
    if (res.residual < tolerance) break;
  }
  res.power = v.transpose();

  auto marginal = [&](const Eigen::VectorXd& joint) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g));
    for (std::size_t a = 0; a < g; ++a)
      for (std::size_t b = 0; b < nb; ++b) out(static_cast<Eigen::Index>(a)) += joint(static_cast<Eigen::Index>(res.state(a, b)));
    return out;
  };
  res.power_marginal = marginal(res.power);
  res.analytic_marginal = marginal(res.analytic);
  return res;
}

/// CSV: state_index,theta_0..theta_{d-1},batch_id,probability (power-iterated vector).
template <typename Scalar>
void write_stationary_csv(std::ostream& out, const DiscreteChainSpec<Scalar>& chain,
                          const StationaryResult& res) {
  const Eigen::Index d = chain.theta_grid.front().size();
  out << "state_index";
  for (Eigen::Index j = 0; j < d; ++j) out << ",theta_" << j;
  out << ",batch_id,probability\n" << std::setprecision(17);
  for (std::size_t a = 0; a < res.grid_size; ++a) {
    for (std::size_t b = 0; b < res.batches.size(); ++b) {
      const auto s = res.state(a, b);
      out << s;
      for (Eigen::Index j = 0; j < d; ++j) out << ',' << chain.theta_grid[a](j);
      out << ',' << b << ',' << res.power(static_cast<Eigen::Index>(s)) << '\n';
    }
  }
}

}  // namespace mhbt
