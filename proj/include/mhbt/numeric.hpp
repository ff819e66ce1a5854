#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Core>

namespace mhbt {

/// log(exp(a) + exp(b)) without overflow; -inf inputs are absorbed.
template <typename Scalar>
Scalar log_add_exp(Scalar a, Scalar b) {
  using std::exp;
  using std::log1p;
  const Scalar hi = std::max(a, b);
  const Scalar lo = std::min(a, b);
  if (hi == -std::numeric_limits<Scalar>::infinity()) return hi;
  return hi + log1p(exp(lo - hi));
}

/// Max-shifted log of summed exponentials over a dense expression.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  const Scalar hi = values.maxCoeff();
  if (!std::isfinite(hi)) return hi;
  return hi + std::log((values.derived().array() - hi).exp().sum());
}

/// Log density of N(0, variance * I_d) at `offset`.
template <typename Derived>
typename Derived::Scalar log_isotropic_normal(const Eigen::MatrixBase<Derived>& offset,
                                              typename Derived::Scalar variance) {
  using Scalar = typename Derived::Scalar;
  const auto d = static_cast<Scalar>(offset.size());
  return Scalar(-0.5) * offset.squaredNorm() / variance -
         Scalar(0.5) * d * std::log(Scalar(2) * std::numbers::pi_v<Scalar> * variance);
}

template <typename Scalar>
Scalar log_normal_pdf(Scalar x, Scalar mean, Scalar variance) {
  const Scalar z = x - mean;
  return Scalar(-0.5) * z * z / variance -
         Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar> * variance);
}

template <typename Scalar>
Scalar logistic(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// Smallest positive double, the stand-in for a zero uniform draw before taking log.
inline double positive_uniform(double u) {
  return u > 0.0 ? u : std::numeric_limits<double>::denorm_min();
}

}  // namespace mhbt
