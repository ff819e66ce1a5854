#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mhbt/batch.hpp"
#include "mhbt/error.hpp"
#include "mhbt/model.hpp"
#include "mhbt/numeric.hpp"
#include "mhbt/proposals.hpp"
#include "mhbt/rng.hpp"

namespace mhbt {

/// Dataset size n, batch size m and scaling constant c_n; temperature T = n / c_n.
struct TemperSpec {
  std::size_t n = 1;
  std::size_t m = 1;
  double c_n = 1.0;

  double temperature() const { return static_cast<double>(n) / c_n; }

  void validate() const {
    detail::require_config(m >= 1 && m <= n, "TemperSpec: need 1 <= m <= n (m = " +
                                                 std::to_string(m) + ", n = " + std::to_string(n) + ")");
    detail::require_config(c_n > 0 && std::isfinite(c_n), "TemperSpec: c_n must be positive");
  }

  /// Classical full-batch MH on the untempered posterior: m = n, c_n = n.
  static TemperSpec full_batch(std::size_t n) { return {n, n, static_cast<double>(n)}; }
};

template <typename Scalar = double>
struct ChainState {
  Vector<Scalar> theta;
  BatchIndex batch;
  Scalar cached_score = 0;                  ///< c_n * mean log-likelihood of `batch` at `theta`
  std::optional<Vector<Scalar>> cached_grad;  ///< mean gradient of `batch` at `theta`, when known
  std::uint64_t iteration = 0;
};

template <typename Scalar = double>
struct StepRecord {
  Vector<Scalar> proposed_theta;
  BatchIndex proposed_batch;
  Direction direction = Direction::symmetric;
  Scalar log_accept_ratio = 0;
  double uniform_draw = 0;
  bool accepted = false;
};

/// The acceptance comparison: log(u) < min(0, log r), with u = 0 mapped to the smallest
/// positive double.
inline bool accept_move(double uniform_draw, double log_r) {
  return std::log(positive_uniform(uniform_draw)) < std::min(0.0, log_r);
}

/// log r = log q(theta' -> theta) - log q(theta -> theta') + proposed_score - cached_score.
template <typename Scalar>
Scalar log_accept_ratio(const ChainState<Scalar>& current, Scalar proposed_score,
                        Scalar log_q_forward, Scalar log_q_reverse) {
  detail::require(std::isfinite(log_q_forward) && std::isfinite(log_q_reverse),
                  "log_accept_ratio: proposal log-densities must be finite");
  return log_q_reverse - log_q_forward + proposed_score - current.cached_score;
}

/// Evaluates c_n * mean log-likelihood of the proposed batch at the proposed point, then
/// forms the acceptance log-ratio against the cached score of `current`.
template <typename Scalar>
Scalar log_accept_ratio(const ChainState<Scalar>& current, const Vector<Scalar>& proposed_theta,
                        const BatchIndex& proposed_batch, Scalar log_q_forward,
                        Scalar log_q_reverse, const TemperSpec& spec,
                        const Likelihood<Scalar>& lik) {
  const Scalar score = static_cast<Scalar>(spec.c_n) *
                       lik.evaluate(proposed_theta, proposed_batch, false).mean_loglik;
  return log_accept_ratio(current, score, log_q_forward, log_q_reverse);
}

/// Whether steps are Metropolis-corrected or always accepted (plain SGLD baseline).
enum class KernelMode { metropolis, unadjusted };

/// Algorithm state that persists between steps: bound likelihood, tempering constants,
/// proposal, and the batch sampler's scratch permutation.
template <typename Scalar = double>
class MhbtKernel {
 public:
  MhbtKernel(const Likelihood<Scalar>& lik, TemperSpec spec, Proposal proposal,
             KernelMode mode = KernelMode::metropolis)
      : lik_(&lik), spec_(spec), proposal_(proposal), mode_(mode),
        sampler_((spec.validate(), spec.n), spec.m) {
    proposal_.validate();
    detail::require_config(static_cast<Eigen::Index>(spec_.n) == lik.size(),
                           "TemperSpec.n = " + std::to_string(spec_.n) +
                               " does not match dataset size " + std::to_string(lik.size()));
  }

  const TemperSpec& spec() const { return spec_; }
  const Proposal& proposal() const { return proposal_; }
  Proposal& proposal() { return proposal_; }
  const Likelihood<Scalar>& likelihood() const { return *lik_; }

  Scalar score(const Vector<Scalar>& theta, const BatchIndex& batch) const {
    return static_cast<Scalar>(spec_.c_n) * lik_->evaluate(theta, batch, false).mean_loglik;
  }

  /// theta_0 supplied, I_0 drawn uniformly, score cached.
  ChainState<Scalar> initial_state(const Vector<Scalar>& theta0, Rng& rng) {
    detail::require(theta0.size() == lik_->param_dim(),
                    detail::size_mismatch("theta0", static_cast<long>(lik_->param_dim()),
                                          static_cast<long>(theta0.size())));
    ChainState<Scalar> s;
    s.theta = theta0;
    sampler_.draw(rng, s.batch);
    refresh(s);
    return s;
  }

  /// Recomputes the cached score (and gradient when the proposal needs one).
  void refresh(ChainState<Scalar>& s) const {
    auto eval = lik_->evaluate(s.theta, s.batch, proposal_.needs_gradient());
    s.cached_score = static_cast<Scalar>(spec_.c_n) * eval.mean_loglik;
    s.cached_grad = std::move(eval.mean_grad);
  }

  /// One iteration: propose theta', draw I', draw u, accept or keep (theta_t, I_t).
  StepRecord<Scalar> step(ChainState<Scalar>& state, Rng& rng) {
    StepRecord<Scalar> rec;
    step_into(state, rng, rec);
    return rec;
  }

  /// As step(), writing into a caller-owned record to reuse its storage.
  void step_into(ChainState<Scalar>& state, Rng& rng, StepRecord<Scalar>& rec) {
    const bool grad = proposal_.needs_gradient();
    if (grad && !state.cached_grad) refresh(state);
    const Vector<Scalar>* g_cur = grad ? &*state.cached_grad : nullptr;

    auto [theta_new, dir] = propose(proposal_, state.theta, g_cur, rng);
    sampler_.draw(rng, rec.proposed_batch);
    auto eval = lik_->evaluate(theta_new, rec.proposed_batch, grad);
    const Scalar score_new = static_cast<Scalar>(spec_.c_n) * eval.mean_loglik;

    Scalar log_r = 0;
    if (mode_ == KernelMode::metropolis) {
      const Vector<Scalar>* g_new = grad ? &*eval.mean_grad : nullptr;
      const Scalar log_fwd = log_density(proposal_, state.theta, theta_new, g_cur);
      const Scalar log_rev = log_density(proposal_, theta_new, state.theta, g_new);
      log_r = log_accept_ratio(state, score_new, log_fwd, log_rev);
    }
    rec.uniform_draw = rng.uniform();
    rec.direction = dir;
    rec.log_accept_ratio = log_r;
    rec.accepted = mode_ == KernelMode::unadjusted || accept_move(rec.uniform_draw, static_cast<double>(log_r));
    if (rec.accepted) {
      rec.proposed_theta = theta_new;
      state.theta = std::move(theta_new);
      if (spec_.m != spec_.n) state.batch = rec.proposed_batch;
      state.cached_score = score_new;
      state.cached_grad = std::move(eval.mean_grad);
    } else {
      rec.proposed_theta = std::move(theta_new);
    }
    ++state.iteration;
  }

 private:
  const Likelihood<Scalar>* lik_;
  TemperSpec spec_;
  Proposal proposal_;
  KernelMode mode_;
  BatchSampler sampler_;
};

/// Free-function form of one step for callers without a persistent kernel.
template <typename Scalar>
std::pair<ChainState<Scalar>, StepRecord<Scalar>> step(ChainState<Scalar> state, const Proposal& proposal,
                                                        const TemperSpec& spec,
                                                        const Likelihood<Scalar>& lik, Rng& rng) {
  MhbtKernel<Scalar> kernel(lik, spec, proposal);
  auto rec = kernel.step(state, rng);
  return {std::move(state), std::move(rec)};
}

// ---- chains --------------------------------------------------------------------------

template <typename Scalar = double>
struct ChainConfig {
  TemperSpec spec;
  Proposal proposal;
  Vector<Scalar> theta0;
  std::uint64_t iterations = 1;
  std::uint64_t seed = 0;
  std::uint64_t thin = 1;
  bool record_trace = false;  ///< keep every StepRecord
  KernelMode mode = KernelMode::metropolis;
};

template <typename Scalar = double>
struct Snapshot {
  std::uint64_t iteration = 0;
  Vector<Scalar> theta;
  bool accepted = false;
  Direction direction = Direction::symmetric;
  Scalar log_r = 0;
};

template <typename Scalar = double>
struct ChainTrace {
  std::vector<Snapshot<Scalar>> snapshots;
  std::vector<StepRecord<Scalar>> records;
  ChainState<Scalar> final_state;
  std::uint64_t accepted = 0;
  std::uint64_t steps = 0;
  std::uint64_t forward_proposed = 0, forward_accepted = 0;
  std::uint64_t backward_proposed = 0, backward_accepted = 0;

  double acceptance_rate() const { return steps ? static_cast<double>(accepted) / static_cast<double>(steps) : 0.0; }
};

namespace detail {

template <typename Scalar>
void tally(ChainTrace<Scalar>& t, const StepRecord<Scalar>& rec) {
  ++t.steps;
  t.accepted += rec.accepted;
  if (rec.direction == Direction::forward) {
    ++t.forward_proposed;
    t.forward_accepted += rec.accepted;
  } else if (rec.direction == Direction::backward) {
    ++t.backward_proposed;
    t.backward_accepted += rec.accepted;
  }
}

}  // namespace detail

/// Runs `iterations` steps from the configured initial state. The initial snapshot is
/// always emitted; later ones every `thin` iterations.
template <typename Scalar>
ChainTrace<Scalar> run_chain(const Likelihood<Scalar>& lik, const ChainConfig<Scalar>& cfg) {
  detail::require_config(cfg.iterations >= 1, "run_chain: iterations must be >= 1");
  detail::require_config(cfg.thin >= 1, "run_chain: thin must be >= 1");
  MhbtKernel<Scalar> kernel(lik, cfg.spec, cfg.proposal, cfg.mode);
  Rng rng(cfg.seed);
  ChainTrace<Scalar> trace;
  ChainState<Scalar> state = kernel.initial_state(cfg.theta0, rng);
  trace.snapshots.push_back({0, state.theta, false, Direction::symmetric, 0});
  StepRecord<Scalar> rec;
  for (std::uint64_t t = 1; t <= cfg.iterations; ++t) {
    kernel.step_into(state, rng, rec);
    detail::tally(trace, rec);
    if (cfg.record_trace) trace.records.push_back(rec);
    if (t % cfg.thin == 0)
      trace.snapshots.push_back({t, state.theta, rec.accepted, rec.direction, rec.log_accept_ratio});
  }
  trace.final_state = std::move(state);
  return trace;
}

/// Runs `count` independent chains; chain c uses the stream Rng::stream(seed, c).
/// `threads` workers partition chains round-robin; results do not depend on it.
template <typename Scalar>
std::vector<ChainTrace<Scalar>> run_chains(const Likelihood<Scalar>& lik, const ChainConfig<Scalar>& cfg,
                                           std::size_t count, std::size_t threads = 1) {
  std::vector<ChainTrace<Scalar>> out(count);
  auto work = [&](std::size_t worker, std::size_t stride) {
    for (std::size_t c = worker; c < count; c += stride) {
      ChainConfig<Scalar> local = cfg;
      local.seed = Rng::stream(cfg.seed, c).engine()();
      out[c] = run_chain(lik, local);
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work, w, threads);
    for (auto& th : pool) th.join();
  }
  return out;
}

/// Trace CSV: iter,accepted,direction,log_r,theta_0,...,theta_{d-1}.
template <typename Scalar>
void write_trace_csv(std::ostream& out, const ChainTrace<Scalar>& trace) {
  const Eigen::Index d = trace.snapshots.empty() ? 0 : trace.snapshots.front().theta.size();
  out << "iter,accepted,direction,log_r";
  for (Eigen::Index j = 0; j < d; ++j) out << ",theta_" << j;
  out << '\n' << std::setprecision(17);
  for (const auto& s : trace.snapshots) {
    out << s.iteration << ',' << (s.accepted ? 1 : 0) << ',' << to_string(s.direction) << ','
        << s.log_r;
    for (Eigen::Index j = 0; j < d; ++j) out << ',' << s.theta(j);
    out << '\n';
  }
}

}  // namespace mhbt
