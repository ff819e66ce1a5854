#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mhbt/dataset.hpp"
#include "mhbt/error.hpp"
#include "mhbt/proposals.hpp"
#include "mhbt/sampler.hpp"

namespace mhbt {

// ---- beta schedule -------------------------------------------------------------------

struct BetaSchedule {
  double trigger_accept = 0.4;
  int probe_steps = 100;
  double decrease_threshold = 0.7;
  double decrease_factor = 0.95;
  double increase_threshold = 0.2;
  double increase_factor = 1.05;
  double max_phase_reduction = 0.5;
  double current_beta = 1.0;
  double phase_start_beta = 1.0;

  void validate() const {
    detail::require_config(current_beta >= 1, "beta schedule: beta must be >= 1");
    detail::require_config(probe_steps >= 1, "beta schedule: probe_steps must be >= 1");
    detail::require_config(decrease_factor > 0 && decrease_factor < 1,
                           "beta schedule: decrease_factor must lie in (0, 1)");
    detail::require_config(increase_factor > 1, "beta schedule: increase_factor must exceed 1");
    detail::require_config(max_phase_reduction > 0 && max_phase_reduction <= 1,
                           "beta schedule: max_phase_reduction must lie in (0, 1]");
  }

  /// Lowest beta reachable in the current adjustment phase.
  double phase_floor() const { return std::max(1.0, (1.0 - max_phase_reduction) * phase_start_beta); }
};

/// Mean acceptance probability of forward-only probe proposals at the given beta.
using BetaProbe = std::function<double(double beta)>;

/// One epoch's adjustment. Above the trigger rate a phase opens at the current beta:
/// probe, shrink while the probe exceeds the decrease threshold, stop at the phase floor.
/// Below the increase threshold beta grows. beta never drops under 1.
inline BetaSchedule update_beta(BetaSchedule sched, double epoch_accept_rate, const BetaProbe& probe,
                                std::vector<double>* history = nullptr) {
  detail::require(epoch_accept_rate >= 0 && epoch_accept_rate <= 1,
                  "update_beta: epoch acceptance rate must lie in [0, 1]");
  if (epoch_accept_rate > sched.trigger_accept) {
    sched.phase_start_beta = sched.current_beta;
    const double floor = sched.phase_floor();
    while (sched.current_beta > floor && probe(sched.current_beta) > sched.decrease_threshold) {
      sched.current_beta = std::max(floor, sched.current_beta * sched.decrease_factor);
      if (history) history->push_back(sched.current_beta);
    }
  }
  if (epoch_accept_rate < sched.increase_threshold) {
    sched.current_beta *= sched.increase_factor;
    if (history) history->push_back(sched.current_beta);
  }
  sched.current_beta = std::max(1.0, sched.current_beta);
  return sched;
}

/// Probe for MhbtKernel chains: `steps` forward RSGLD proposals from `state` at the given
/// beta, each with a fresh batch, returning the mean of min(1, r). The chain is untouched.
template <typename Scalar>
double forward_probe(const MhbtKernel<Scalar>& kernel, const ChainState<Scalar>& state, double beta,
                     int steps, Rng& rng) {
  detail::require(state.cached_grad.has_value(), "forward_probe: state has no cached gradient");
  RsgldConfig cfg = kernel.proposal().langevin;
  cfg.beta = beta;
  const auto& lik = kernel.likelihood();
  BatchSampler sampler(kernel.spec().n, kernel.spec().m);
  BatchIndex batch;
  Vector<Scalar> z(state.theta.size());
  double total = 0;
  for (int k = 0; k < steps; ++k) {
    rng.fill_normal(z);
    const Vector<Scalar> theta_new = rsgld_move(state.theta, *state.cached_grad, cfg, Direction::forward, z);
    sampler.draw(rng, batch);
    const auto eval = lik.evaluate(theta_new, batch, true);
    const Scalar score = static_cast<Scalar>(kernel.spec().c_n) * eval.mean_loglik;
    const Scalar log_r = log_proposal_ratio(state.theta, theta_new, *state.cached_grad, *eval.mean_grad, cfg) +
                         score - state.cached_score;
    total += std::exp(std::min(0.0, static_cast<double>(log_r)));
  }
  return total / steps;
}

// ---- acceptance accounting -----------------------------------------------------------

struct AcceptanceWindow {
  std::uint64_t start = 0;
  std::uint64_t length = 0;
  std::uint64_t accepted = 0;
  std::uint64_t forward = 0, forward_accepted = 0;
  std::uint64_t backward = 0, backward_accepted = 0;
  std::uint64_t symmetric = 0, symmetric_accepted = 0;
  double beta = 1.0;

  template <typename Scalar>
  void add(const StepRecord<Scalar>& rec) {
    ++length;
    accepted += rec.accepted;
    switch (rec.direction) {
      case Direction::forward: ++forward, forward_accepted += rec.accepted; break;
      case Direction::backward: ++backward, backward_accepted += rec.accepted; break;
      default: ++symmetric, symmetric_accepted += rec.accepted; break;
    }
  }

  static double ratio(std::uint64_t a, std::uint64_t b) {
    return b ? static_cast<double>(a) / static_cast<double>(b) : std::numeric_limits<double>::quiet_NaN();
  }
  double accept_rate() const { return ratio(accepted, length); }
  double forward_rate() const { return ratio(forward_accepted, forward); }
  double backward_rate() const { return ratio(backward_accepted, backward); }
};

/// Non-overlapping windows of `window` records; the last one may be short.
template <typename Scalar>
std::vector<AcceptanceWindow> acceptance_summary(const std::vector<StepRecord<Scalar>>& records,
                                                 std::size_t window, double beta = 1.0) {
  detail::require(window >= 1, "acceptance_summary: window must be >= 1");
  std::vector<AcceptanceWindow> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i % window == 0) {
      out.emplace_back();
      out.back().start = i;
      out.back().beta = beta;
    }
    out.back().add(records[i]);
  }
  return out;
}

/// window_start,accept_rate,forward_rate,backward_rate,beta. Empty direction classes print nan.
inline void write_diagnostics_csv(std::ostream& out, const std::vector<AcceptanceWindow>& windows) {
  out << "window_start,accept_rate,forward_rate,backward_rate,beta\n" << std::setprecision(17);
  for (const auto& w : windows)
    out << w.start << ',' << w.accept_rate() << ',' << w.forward_rate() << ',' << w.backward_rate()
        << ',' << w.beta << '\n';
}

// ---- histograms and total variation --------------------------------------------------

/// Equal-width bins per dimension over a box, with dense cell counts.
class HistogramGrid {
 public:
  HistogramGrid(std::vector<std::vector<double>> edges) : edges_(std::move(edges)) {
    detail::require(!edges_.empty(), "HistogramGrid: at least one dimension");
    std::size_t cells = 1;
    for (const auto& e : edges_) {
      detail::require(e.size() >= 2, "HistogramGrid: each dimension needs >= 1 bin");
      for (std::size_t k = 1; k < e.size(); ++k)
        detail::require(e[k] > e[k - 1], "HistogramGrid: edges must be strictly increasing");
      detail::require(cells <= kMaxCells / (e.size() - 1), "HistogramGrid: too many cells");
      cells *= e.size() - 1;
    }
    counts_.assign(cells, 0);
  }

  /// `bins` equal-width bins per dimension covering the pooled range of `sets` widened by
  /// one bin on each side: bin width (max - min) / (bins - 2).
  template <typename Derived>
  static HistogramGrid spanning(const std::vector<const Eigen::MatrixBase<Derived>*>& sets, int bins) {
    detail::require(bins >= 3, "HistogramGrid::spanning: need >= 3 bins");
    detail::require(!sets.empty(), "HistogramGrid::spanning: no sample sets");
    const Eigen::Index d = sets.front()->cols();
    std::vector<std::vector<double>> edges(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const auto* s : sets) {
        detail::require(s->cols() == d, "HistogramGrid::spanning: sample sets differ in dimension");
        if (s->rows() == 0) continue;
        lo = std::min(lo, static_cast<double>(s->col(j).minCoeff()));
        hi = std::max(hi, static_cast<double>(s->col(j).maxCoeff()));
      }
      detail::require(std::isfinite(lo) && std::isfinite(hi), "HistogramGrid::spanning: no finite samples");
      if (hi - lo <= 0) {
        lo -= 0.5;
        hi += 0.5;
      }
      const double w = (hi - lo) / (bins - 2);
      auto& e = edges[static_cast<std::size_t>(j)];
      e.resize(static_cast<std::size_t>(bins) + 1);
      for (int k = 0; k <= bins; ++k) e[static_cast<std::size_t>(k)] = lo + (k - 1) * w;
    }
    return HistogramGrid(std::move(edges));
  }

  template <typename Derived>
  static HistogramGrid spanning(const Eigen::MatrixBase<Derived>& a, const Eigen::MatrixBase<Derived>& b, int bins) {
    return spanning<Derived>({&a, &b}, bins);
  }

  std::size_t dims() const { return edges_.size(); }
  std::size_t cells() const { return counts_.size(); }
  const std::vector<std::vector<double>>& edges() const { return edges_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::uint64_t total() const { return total_; }

  /// Cell of a point; coordinates outside the box fall into the boundary bins.
  template <typename Derived>
  std::size_t cell_of(const Eigen::DenseBase<Derived>& x) const {
    detail::require(static_cast<std::size_t>(x.size()) == edges_.size(),
                    detail::size_mismatch("histogram point", static_cast<long>(edges_.size()),
                                          static_cast<long>(x.size())));
    std::size_t cell = 0;
    for (std::size_t j = 0; j < edges_.size(); ++j) {
      const auto& e = edges_[j];
      const std::size_t bins = e.size() - 1;
      const auto it = std::upper_bound(e.begin(), e.end(), static_cast<double>(x(static_cast<Eigen::Index>(j))));
      std::size_t b = it == e.begin() ? 0 : static_cast<std::size_t>(it - e.begin()) - 1;
      b = std::min(b, bins - 1);
      cell = cell * bins + b;
    }
    return cell;
  }

  template <typename Derived>
  void add(const Eigen::DenseBase<Derived>& x) {
    ++counts_[cell_of(x)];
    ++total_;
  }

  /// Adds every row of a samples-by-dimension matrix.
  template <typename Derived>
  void add_rows(const Eigen::MatrixBase<Derived>& samples) {
    for (Eigen::Index i = 0; i < samples.rows(); ++i) add(samples.row(i));
  }

  /// Sets counts directly (cells in row-major order of the per-dimension bins).
  void set_counts(std::vector<std::uint64_t> counts) {
    detail::require(counts.size() == counts_.size(),
                    detail::size_mismatch("histogram counts", static_cast<long>(counts_.size()),
                                          static_cast<long>(counts.size())));
    counts_ = std::move(counts);
    total_ = 0;
    for (auto c : counts_) total_ += c;
  }

  /// An empty grid with the same edges.
  HistogramGrid empty_like() const { return HistogramGrid(edges_); }

 private:
  static constexpr std::size_t kMaxCells = std::size_t(1) << 26;
  std::vector<std::vector<double>> edges_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// Half the L1 distance between relative cell frequencies.
inline double tv_distance(const HistogramGrid& a, const HistogramGrid& b) {
  detail::require(a.edges() == b.edges(), "tv_distance: histograms use different bin edges");
  detail::require(a.total() > 0 && b.total() > 0, "tv_distance: empty histogram");
  const double na = static_cast<double>(a.total()), nb = static_cast<double>(b.total());
  double sum = 0;
  for (std::size_t k = 0; k < a.cells(); ++k)
    sum += std::abs(static_cast<double>(a.counts()[k]) / na - static_cast<double>(b.counts()[k]) / nb);
  return 0.5 * sum;
}

/// TV between two sample matrices (rows are draws) on the default pooled grid.
template <typename DerivedA, typename DerivedB>
double tv_distance_samples(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b, int bins = 20) {
  const Eigen::MatrixXd da = a.template cast<double>(), db = b.template cast<double>();
  HistogramGrid ga = HistogramGrid::spanning(da, db, bins);
  HistogramGrid gb = ga.empty_like();
  ga.add_rows(da);
  gb.add_rows(db);
  return tv_distance(ga, gb);
}

struct TvPoint {
  std::uint64_t iteration = 0;
  double tv = 0;
};

inline void write_tv_csv(std::ostream& out, const std::vector<TvPoint>& series) {
  out << "iteration,tv\n" << std::setprecision(17);
  for (const auto& p : series) out << p.iteration << ',' << p.tv << '\n';
}

// ---- mode visits ---------------------------------------------------------------------

struct ModeVisits {
  std::vector<std::uint64_t> visits;  ///< snapshots inside each ball
  std::uint64_t unassigned = 0;
  std::uint64_t crossings = 0;        ///< consecutive assigned snapshots in different balls

  bool covers_all() const {
    return std::all_of(visits.begin(), visits.end(), [](auto v) { return v > 0; });
  }
};

/// Assigns each snapshot to the nearest center within `radius`. Unassigned snapshots are
/// skipped when pairing consecutive assignments.
template <typename Scalar>
ModeVisits mode_visits(const std::vector<Vector<Scalar>>& trace, const std::vector<Vector<Scalar>>& centers,
                       double radius) {
  detail::require_config(radius > 0, "mode_visits: radius must be positive");
  detail::require_config(!centers.empty(), "mode_visits: no mode centers");
  for (std::size_t a = 0; a < centers.size(); ++a)
    for (std::size_t b = a + 1; b < centers.size(); ++b)
      detail::require_config(static_cast<double>((centers[a] - centers[b]).norm()) > 2 * radius,
                             "mode_visits: balls around centers " + std::to_string(a) + " and " +
                                 std::to_string(b) + " overlap");
  ModeVisits out;
  out.visits.assign(centers.size(), 0);
  long last = -1;
  for (const auto& theta : trace) {
    long mode = -1;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (static_cast<double>((theta - centers[c]).norm()) <= radius) {
        mode = static_cast<long>(c);
        break;  // balls are disjoint
      }
    }
    if (mode < 0) {
      ++out.unassigned;
      continue;
    }
    ++out.visits[static_cast<std::size_t>(mode)];
    if (last >= 0 && last != mode) ++out.crossings;
    last = mode;
  }
  return out;
}

template <typename Scalar>
ModeVisits mode_visits(const std::vector<Snapshot<Scalar>>& snapshots, const std::vector<Vector<Scalar>>& centers,
                       double radius) {
  std::vector<Vector<Scalar>> thetas;
  thetas.reserve(snapshots.size());
  for (const auto& s : snapshots) thetas.push_back(s.theta);
  return mode_visits(thetas, centers, radius);
}

}  // namespace mhbt
