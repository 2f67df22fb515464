#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "mpd/errors.hpp"

namespace mpd {

/// Below this value of gamma*eta*t the cancelling combinations of exponentials
/// are summed as power series instead of evaluated in closed form.
inline constexpr double kSeriesThreshold = 1.0;

namespace detail {

// a + expm1(-a) = sum_{k>=2} (-a)^k / k!
template <typename Scalar>
Scalar drift_kernel_series(Scalar a) {
  Scalar term = a * a / Scalar(2);
  Scalar sum = 0;
  for (int k = 2; k < 60; ++k) {
    sum += term;
    if (std::abs(term) <= std::numeric_limits<Scalar>::epsilon() * std::abs(sum) * Scalar(1e-3)) break;
    term *= -a / Scalar(k + 1);
  }
  return sum;
}

// 2a + 4 expm1(-a) - expm1(-2a) = sum_{k>=3} (-1)^k (4 - 2^k) a^k / k!
template <typename Scalar>
Scalar position_variance_series(Scalar a) {
  Scalar power = a * a * a / Scalar(6);  // a^k / k!
  Scalar two_k = 8;
  Scalar sign = -1;
  Scalar sum = 0;
  for (int k = 3; k < 80; ++k) {
    const Scalar term = sign * (Scalar(4) - two_k) * power;
    sum += term;
    if (std::abs(term) <= std::numeric_limits<Scalar>::epsilon() * std::abs(sum) * Scalar(1e-3)) break;
    power *= a / Scalar(k + 1);
    two_k *= 2;
    sign = -sign;
  }
  return sum;
}

template <typename Scalar>
Scalar drift_kernel(Scalar a) {
  using std::expm1;
  return a < Scalar(kSeriesThreshold) ? drift_kernel_series(a) : a + expm1(-a);
}

template <typename Scalar>
Scalar position_variance_kernel(Scalar a) {
  using std::expm1;
  return a < Scalar(kSeriesThreshold) ? position_variance_series(a)
                                      : Scalar(2) * a + Scalar(4) * expm1(-a) - expm1(Scalar(-2) * a);
}

}  // namespace detail

/// Covariance of the exact one-step transition of
///   dX = eta U dt,  dU = (g - gamma eta U) dt + sqrt(2 gamma) dW
/// over time t. Every block is a multiple of the identity, so only the three
/// scalars are stored.
template <typename Scalar>
struct TransitionCovariance {
  Scalar xx;
  Scalar ux;
  Scalar uu;
};

template <typename Scalar>
TransitionCovariance<Scalar> transition_covariance(Scalar gamma, Scalar eta, Scalar t) {
  using std::expm1;
  require(gamma > 0 && eta > 0 && t > 0, "transition_covariance: gamma, eta and t must be positive");
  const Scalar a = gamma * eta * t;
  const Scalar iota = -expm1(-a);
  const Scalar inv_rate = Scalar(1) / (gamma * eta);
  return {inv_rate / gamma * detail::position_variance_kernel(a), iota * iota * inv_rate,
          -expm1(Scalar(-2) * a) / eta};
}

/// Everything needed to apply one exact frozen-gradient step of length h:
///   X' = X + pos_mom_weight U + drift_pos_weight g + L_xx xi
///   U' = omega U + drift_mom_weight g + L_xu xi + L_uu xi'
template <typename Scalar>
struct TransitionCoefficients {
  Scalar iota;              ///< 1 - exp(-gamma eta h)
  Scalar omega;             ///< exp(-gamma eta h)
  Scalar pos_mom_weight;    ///< iota / gamma
  Scalar drift_pos_weight;  ///< (h - iota / (gamma eta)) / gamma
  Scalar drift_mom_weight;  ///< iota / (gamma eta)
  Scalar L_xx;
  Scalar L_xu;
  Scalar L_uu;

  TransitionCovariance<Scalar> covariance() const {
    return {L_xx * L_xx, L_xu * L_xx, L_xu * L_xu + L_uu * L_uu};
  }
};

template <typename Scalar>
TransitionCoefficients<Scalar> transition_coefficients(Scalar gamma, Scalar eta, Scalar h) {
  using std::exp;
  using std::expm1;
  using std::max;
  using std::sqrt;
  require(gamma > 0 && eta > 0 && h > 0,
          "transition_coefficients: gamma, eta and h must be positive");
  const Scalar a = gamma * eta * h;
  const Scalar inv_rate = Scalar(1) / (gamma * eta);
  const auto cov = transition_covariance(gamma, eta, h);

  TransitionCoefficients<Scalar> c;
  c.iota = -expm1(-a);
  c.omega = exp(-a);
  c.pos_mom_weight = c.iota / gamma;
  c.drift_pos_weight = inv_rate / gamma * detail::drift_kernel(a);
  c.drift_mom_weight = c.iota * inv_rate;
  c.L_xx = sqrt(cov.xx);
  c.L_xu = c.L_xx > 0 ? cov.ux / c.L_xx : Scalar(0);
  // Schur complement; roundoff can push it slightly below zero.
  c.L_uu = sqrt(max(Scalar(0), cov.uu - c.L_xu * c.L_xu));
  return c;
}

/// Mean and covariance of (X_t, U_t) started from (x0, u0) with the gradient
/// frozen at g.
template <typename Scalar>
struct TransitionMoments {
  using VectorS = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  VectorS mean_x;
  VectorS mean_u;
  TransitionCovariance<Scalar> cov;
};

template <typename Scalar>
TransitionMoments<Scalar> exact_transition_moments(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x0,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& u0,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& g, Scalar gamma, Scalar eta, Scalar t) {
  require(x0.size() == u0.size() && x0.size() == g.size(),
          "exact_transition_moments: x0, u0 and g must have equal sizes");
  const auto c = transition_coefficients(gamma, eta, t);
  TransitionMoments<Scalar> out;
  out.mean_u = c.omega * u0 + c.drift_mom_weight * g;
  out.mean_x = x0 + c.pos_mom_weight * u0 + c.drift_pos_weight * g;
  out.cov = transition_covariance(gamma, eta, t);
  return out;
}

}  // namespace mpd
