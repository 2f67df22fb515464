#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mpd/gaussian_linear.hpp"
#include "mpd/integrators.hpp"

namespace mpd {

/// One row of a run trace. Metrics keep their insertion order, which is the
/// column order of the CSV.
struct RunRecord {
  std::uint64_t iteration = 0;
  double wallclock = 0.0;
  Vector theta;
  std::vector<std::pair<std::string, double>> metrics;

  /// Value of a named metric; throws ContractViolation if absent.
  double metric(const std::string& name) const;
};

/// Empirical Wasserstein-1 distance between two 1-D samples: the L1 distance
/// between their quantile functions. Equal sizes reduce to the mean absolute
/// difference of order statistics.
double empirical_w1(std::vector<double> a, std::vector<double> b);
double empirical_w1(const Vector& a, const Vector& b);

enum class AbcWeights {
  kNormalized,  ///< w(k) = 2k / (K (K + 1)), sums to one
  kRaw,         ///< w(k) = 2k / (K^3 (K + 1)), with the extra 1/K factors kept
};

/// Area between curves: sum_k w(k) (baseline(k) - candidate(k)), k = 1..K.
/// Positive when `candidate` has the lower curve, with late iterations
/// weighted most.
double abc(const std::vector<double>& baseline, const std::vector<double>& candidate,
           AbcWeights weights = AbcWeights::kNormalized);

/// |theta - theta_star| (Euclidean norm).
double param_error(const Vector& theta, const Vector& theta_star);
double param_error(double theta, double theta_star);

/// KL(N(mean_a, var_a) || N(mean_b, var_b)) for scalars.
double kl_normal(double mean_a, double var_a, double mean_b, double var_b);

/// Free energy of ToyHM for q = prod_i N(q_mean_i, q_var_i):
///   -log p_theta(y) + sum_i KL(q_i || p_theta(x_i | y_i)).
double toyhm_free_energy(double theta, const Vector& q_mean, const Vector& q_var, const Vector& y,
                         double sigma2);
double toyhm_free_energy(double theta, const Vector& q_mean, double q_var, const Vector& y,
                         double sigma2);

/// Independent Gaussian q over (x, u), per-coordinate moments.
struct DiagonalGaussianMoments {
  Vector x_mean;
  Vector x_var;
  Vector u_mean;
  Vector u_var;
};

/// Momentum-enriched free energy on ToyHM:
///   toyhm_free_energy(x-marginal) + sum_i KL(q_u,i || N(0, 1/eta_x)) + (eta_theta/2) |m|^2.
double momentum_free_energy(double theta, const Vector& m, const DiagonalGaussianMoments& q,
                            const MomentumParams& params, const Vector& y, double sigma2);

/// Free energy of a quadratic model for q_X = N(mean, cov): -E_q l - H(q).
double gaussian_free_energy(const GaussianLinearModel& model, const Vector& theta,
                            const Vector& mean, const Matrix& cov);

/// Momentum-enriched free energy of a quadratic model for a joint Gaussian
/// q over w = (x, u) with mean (2 d_x) and covariance (2 d_x)^2:
///   KL(q || p_theta(x | y) r_{eta_x}) - log p_theta(y) + (eta_theta/2) |m|^2.
double gaussian_momentum_free_energy(const GaussianLinearModel& model, const Vector& theta,
                                     const Vector& m, const Vector& mean, const Matrix& cov,
                                     const MomentumParams& params);

}  // namespace mpd
