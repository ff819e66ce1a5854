#pragma once

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "mhbt/dataset.hpp"
#include "mhbt/error.hpp"
#include "mhbt/numeric.hpp"
#include "mhbt/rng.hpp"

namespace mhbt {

enum class Direction { forward, backward, symmetric };

inline const char* to_string(Direction d) {
  switch (d) {
    case Direction::forward: return "forward";
    case Direction::backward: return "backward";
    default: return "symmetric";
  }
}

/// Gaussian random walk theta' = theta + delta * Z.
struct RwConfig {
  double delta = 0.1;

  void validate() const {
    detail::require_config(delta > 0 && std::isfinite(delta), "rw: delta must be positive");
  }
};

/// Stochastic-gradient proposal parameters. epsilon follows the SGD learning-rate
/// convention, so the injected noise has per-coordinate scale sqrt(2 epsilon) / n.
struct RsgldConfig {
  double epsilon = 1e-3;
  double beta = 1.0;
  double n = 1.0;

  void validate() const {
    detail::require_config(epsilon > 0 && std::isfinite(epsilon), "rsgld: epsilon must be positive");
    detail::require_config(beta >= 1 && std::isfinite(beta), "rsgld: beta must be >= 1");
    detail::require_config(n >= 1, "rsgld: n must be >= 1");
  }

  double noise_scale() const { return std::sqrt(2 * epsilon) / n; }
  double forward_variance() const { return 2 * epsilon / (n * n); }
  double backward_variance() const { return forward_variance() * beta * beta; }
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v, const char* what) {
  require(v.allFinite(), std::string(what) + " has non-finite entries");
}

}  // namespace detail

// ---- random walk ---------------------------------------------------------------------

template <typename Scalar>
Vector<Scalar> propose_rw(const Vector<Scalar>& theta, const RwConfig& cfg, Rng& rng) {
  Vector<Scalar> z(theta.size());
  rng.fill_normal(z);
  return theta + static_cast<Scalar>(cfg.delta) * z;
}

template <typename Scalar>
Scalar log_density_rw(const Vector<Scalar>& from, const Vector<Scalar>& to, const RwConfig& cfg) {
  return log_isotropic_normal(to - from, static_cast<Scalar>(cfg.delta * cfg.delta));
}

// ---- SGLD ----------------------------------------------------------------------------

/// Deterministic SGLD move for a given standard-normal draw `z`.
template <typename Scalar>
Vector<Scalar> sgld_move(const Vector<Scalar>& theta, const Vector<Scalar>& grad,
                         const RsgldConfig& cfg, const Vector<Scalar>& z) {
  return theta + static_cast<Scalar>(cfg.epsilon) * grad + static_cast<Scalar>(cfg.noise_scale()) * z;
}

template <typename Scalar>
Vector<Scalar> propose_sgld(const Vector<Scalar>& theta, const Vector<Scalar>& grad,
                            const RsgldConfig& cfg, Rng& rng) {
  detail::require_finite(grad, "propose_sgld: gradient");
  Vector<Scalar> z(theta.size());
  rng.fill_normal(z);
  return sgld_move(theta, grad, cfg, z);
}

/// Single-Gaussian density of the SGLD move from `from` (gradient taken at `from`).
template <typename Scalar>
Scalar log_density_sgld(const Vector<Scalar>& from, const Vector<Scalar>& to,
                        const Vector<Scalar>& grad_from, const RsgldConfig& cfg) {
  detail::require_finite(grad_from, "log_density_sgld: gradient");
  detail::require_finite(to - from, "log_density_sgld: step");
  return log_isotropic_normal(to - from - static_cast<Scalar>(cfg.epsilon) * grad_from,
                              static_cast<Scalar>(cfg.forward_variance()));
}

// ---- RSGLD ---------------------------------------------------------------------------

/// Forward: theta + eps g + s Z. Backward: theta - eps g + s beta Z.
template <typename Scalar>
Vector<Scalar> rsgld_move(const Vector<Scalar>& theta, const Vector<Scalar>& grad,
                          const RsgldConfig& cfg, Direction dir, const Vector<Scalar>& z) {
  const auto eps = static_cast<Scalar>(cfg.epsilon);
  const auto s = static_cast<Scalar>(cfg.noise_scale());
  if (dir == Direction::backward) return theta - eps * grad + (s * static_cast<Scalar>(cfg.beta)) * z;
  return theta + eps * grad + s * z;
}

/// Fair coin for the direction, then the Gaussian draw.
template <typename Scalar>
std::pair<Vector<Scalar>, Direction> propose_rsgld(const Vector<Scalar>& theta,
                                                   const Vector<Scalar>& grad,
                                                   const RsgldConfig& cfg, Rng& rng) {
  detail::require_finite(grad, "propose_rsgld: gradient");
  const Direction dir = rng.coin() ? Direction::forward : Direction::backward;
  Vector<Scalar> z(theta.size());
  rng.fill_normal(z);
  return {rsgld_move(theta, grad, cfg, dir, z), dir};
}

/// log q(from -> to) for the two-component mixture, gradient taken at `from`.
template <typename Scalar>
Scalar log_density_rsgld(const Vector<Scalar>& from, const Vector<Scalar>& to,
                         const Vector<Scalar>& grad_from, const RsgldConfig& cfg) {
  detail::require_finite(grad_from, "log_density_rsgld: gradient");
  detail::require_finite(from, "log_density_rsgld: origin");
  detail::require_finite(to, "log_density_rsgld: destination");
  const auto eps = static_cast<Scalar>(cfg.epsilon);
  const Vector<Scalar> step = to - from;
  const Scalar fwd = log_isotropic_normal(step - eps * grad_from, static_cast<Scalar>(cfg.forward_variance()));
  const Scalar bwd = log_isotropic_normal(step + eps * grad_from, static_cast<Scalar>(cfg.backward_variance()));
  return log_add_exp(fwd, bwd) - std::numbers::ln2_v<Scalar>;
}

/// log q_J(theta' -> theta) - log q_I(theta -> theta') with each direction using the
/// gradient of its own origin batch.
template <typename Scalar>
Scalar log_proposal_ratio(const Vector<Scalar>& theta, const Vector<Scalar>& theta_new,
                          const Vector<Scalar>& grad_current, const Vector<Scalar>& grad_proposed,
                          const RsgldConfig& cfg) {
  return log_density_rsgld(theta_new, theta, grad_proposed, cfg) -
         log_density_rsgld(theta, theta_new, grad_current, cfg);
}

// ---- kernel selection ----------------------------------------------------------------

enum class ProposalKind { rw, sgld, rsgld };

inline const char* to_string(ProposalKind k) {
  switch (k) {
    case ProposalKind::rw: return "rw";
    case ProposalKind::sgld: return "sgld";
    default: return "rsgld";
  }
}

inline ProposalKind parse_proposal_kind(const std::string& s) {
  if (s == "rw") return ProposalKind::rw;
  if (s == "sgld") return ProposalKind::sgld;
  if (s == "rsgld") return ProposalKind::rsgld;
  throw ConfigError("unknown proposal '" + s + "' (expected rw, sgld or rsgld)");
}

/// A proposal kernel with its parameters; only the block matching `kind` is used.
struct Proposal {
  ProposalKind kind = ProposalKind::rw;
  RwConfig rw;
  RsgldConfig langevin;

  static Proposal random_walk(double delta) { return {ProposalKind::rw, {delta}, {}}; }
  static Proposal sgld(double epsilon, double n) {
    return {ProposalKind::sgld, {}, {epsilon, 1.0, n}};
  }
  static Proposal rsgld(double epsilon, double beta, double n) {
    return {ProposalKind::rsgld, {}, {epsilon, beta, n}};
  }

  bool needs_gradient() const { return kind != ProposalKind::rw; }

  void validate() const {
    if (kind == ProposalKind::rw)
      rw.validate();
    else
      langevin.validate();
  }
};

/// Draws from the kernel; `grad` is ignored for the random walk.
template <typename Scalar>
std::pair<Vector<Scalar>, Direction> propose(const Proposal& p, const Vector<Scalar>& theta,
                                             const Vector<Scalar>* grad, Rng& rng) {
  switch (p.kind) {
    case ProposalKind::rw: return {propose_rw(theta, p.rw, rng), Direction::symmetric};
    case ProposalKind::sgld: return {propose_sgld(theta, *grad, p.langevin, rng), Direction::forward};
    default: return propose_rsgld(theta, *grad, p.langevin, rng);
  }
}

/// log q(from -> to) under the kernel.
template <typename Scalar>
Scalar log_density(const Proposal& p, const Vector<Scalar>& from, const Vector<Scalar>& to,
                   const Vector<Scalar>* grad_from) {
  switch (p.kind) {
    case ProposalKind::rw: return log_density_rw(from, to, p.rw);
    case ProposalKind::sgld: return log_density_sgld(from, to, *grad_from, p.langevin);
    default: return log_density_rsgld(from, to, *grad_from, p.langevin);
  }
}

}  // namespace mhbt
