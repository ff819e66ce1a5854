#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mhbt/diagnostics.hpp"
#include "mhbt/experiments/config.hpp"
#include "mhbt/experiments/manifest.hpp"
#include "mhbt/model.hpp"
#include "mhbt/sampler.hpp"

namespace mhbt::experiments {

struct RunOptions {
  bool write_outputs = true;    ///< write CSVs and the manifest under run.out
  std::ostream* log = nullptr;  ///< progress lines
};

// ---- step-size tuning ----------------------------------------------------------------

struct TuneSettings {
  double target = 0.3;
  double tolerance = 0.05;
  std::uint64_t pilot_iterations = 2000;
  int max_steps = 20;
  double lo = 1e-8;
  double hi = 1e2;

  static TuneSettings from(const Config& cfg);
};

struct TunePoint {
  double delta = 0;
  double rate = 0;
};

struct TuneResult {
  double delta = 0;
  double rate = 0;
  bool converged = false;  ///< rate within target +- tolerance
  bool saturated = false;  ///< every delta accepted; the target is flat
  std::vector<TunePoint> path;
};

/// Bisection on log delta over random-walk pilot runs started at `theta`. Every pilot
/// uses the same seed. Throws TuningError when [lo, hi] does not bracket the target.
TuneResult tune_step_size(const Likelihood<double>& lik, const TemperSpec& spec, const Vector<double>& theta,
                          const TuneSettings& settings, std::uint64_t seed);

class TuningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- gaussian convergence ------------------------------------------------------------

struct GaussianConvergenceResult {
  std::vector<std::uint64_t> checkpoints;
  std::vector<double> tv_mhbt;
  std::vector<double> tv_full;  ///< empty when the full-batch run is disabled
  double delta = 0;
  double accept_mhbt = 0;
  double accept_full = 0;
  double target_variance = 0;  ///< T / (n + 1)
  Eigen::VectorXd variance_mhbt;  ///< across chains at the last checkpoint
  Eigen::VectorXd variance_full;
  Eigen::VectorXd reference_mean;
  RunManifest manifest;
};

GaussianConvergenceResult run_gaussian_convergence(const Config& cfg, const RunOptions& opts = {});

/// `count` log-spaced distinct iterations in [1, last], always including 1 and last.
std::vector<std::uint64_t> log_checkpoints(std::uint64_t last, std::size_t count);

// ---- mixture traveling ---------------------------------------------------------------

struct MixtureResult {
  double delta_mhbt = 0;
  double delta_full = 0;
  double accept_mhbt = 0;
  double accept_full = 0;
  std::vector<Vector<double>> centers;
  double radius = 0;
  std::vector<ModeVisits> mhbt;  ///< one per chain pair
  std::vector<ModeVisits> full;
  std::uint64_t mhbt_iterations = 0;
  std::uint64_t full_iterations = 0;
  bool pooled_covers_all = false;  ///< MHBT and full-batch samples together visit every ball
  bool argmax_match = false;       ///< histogram peaks sit next to the tempered posterior's two peaks
  RunManifest manifest;

  double mhbt_crossings_per(std::uint64_t iterations) const;
};

MixtureResult run_mixture_traveling(const Config& cfg, const RunOptions& opts = {});

/// Local maximum of the full-data mean log-likelihood reached by gradient ascent from
/// `start`, and its label-swapped twin (theta_1 + theta_2, -theta_2).
std::vector<Vector<double>> mixture_modes(const Likelihood<double>& lik, const Vector<double>& start);

// ---- acceptance scaling --------------------------------------------------------------

struct ScalingCell {
  std::size_t dim = 0;
  std::string proposal;  ///< "sgld" or "rsgld"
  double beta = 1;
  double epsilon = 0;
  double mean_accept = 0;  ///< mean of min(1, r) over the window
  double forward_rate = 0;
  double backward_rate = 0;
};

struct ScalingSummary {
  std::size_t dim = 0;
  std::string proposal;
  double beta = 1;
  double largest_eps_half = 0;    ///< largest grid epsilon with mean acceptance >= 0.5, NaN if none
  double largest_eps_tenth = 0;   ///< same for 0.1
};

struct ScalingResult {
  std::vector<ScalingCell> cells;
  std::vector<ScalingSummary> summaries;
  RunManifest manifest;
};

/// Epsilon grid for dimension d: d^(-1/4)/n times 10^(k/per_decade) for k spanning
/// [low, high] decades.
std::vector<double> epsilon_grid(std::size_t dim, std::size_t n, int per_decade, double low, double high);

ScalingResult run_acceptance_scaling(const Config& cfg, const RunOptions& opts = {});

// ---- toy neural network --------------------------------------------------------------

struct EpochRow {
  std::string method;  ///< rsgld, sgd or sgld
  std::uint64_t round = 0;
  std::uint64_t epoch = 0;
  double train_error = 0;
  double test_error = 0;
  double accept_rate = 1;
  double forward_rate = 1;
  double backward_rate = 1;
  double beta = 1;
};

struct ToyNnResult {
  std::vector<EpochRow> rows;
  double final_beta = 1;
  double final_train_error = 1;
  std::int64_t first_epoch_below_5pct = -1;  ///< RSGLD, first round
  std::uint64_t forward_proposed = 0, forward_accepted = 0;
  std::uint64_t backward_proposed = 0, backward_accepted = 0;
  RunManifest manifest;

  double forward_rate() const;
  double backward_rate() const;
};

/// Three Gaussian clusters with centers on a circle; labels are cluster ids.
Dataset<double> cluster_data(std::size_t n, double radius, double spread, std::uint64_t seed);

ToyNnResult run_toy_nn(const Config& cfg, const RunOptions& opts = {});

// ---- tune-delta and oracle-check -----------------------------------------------------

struct TuneDeltaResult {
  TuneResult tune;
  RunManifest manifest;
};

TuneDeltaResult run_tune_delta(const Config& cfg, const RunOptions& opts = {});

struct OracleInstance {
  std::size_t n = 0, m = 0, grid = 0;
  double c_n = 0;
  double max_abs_error = 0;
  double balance_error = 0;
  double marginal_error = 0;  ///< theta-marginal, power vs analytic
  std::uint64_t sweeps = 0;
  bool pass = false;
};

struct OracleCheckResult {
  std::vector<OracleInstance> instances;
  bool all_pass = false;
  RunManifest manifest;
};

OracleCheckResult run_oracle_check(const Config& cfg, const RunOptions& opts = {});

}  // namespace mhbt::experiments
