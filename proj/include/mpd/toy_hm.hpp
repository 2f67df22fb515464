#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mpd/model.hpp"

namespace mpd {

/// Toy hierarchical model with one scalar latent per observation:
///   p_theta(y, x) = prod_i N(y_i; x_i, 1) N(x_i; theta, sigma2).
/// d_theta = 1 and d_x = N.
class ToyHM final : public LatentModel {
 public:
  ToyHM(Vector y, double sigma2);

  std::size_t theta_dim() const override { return 1; }
  std::size_t latent_dim() const override { return static_cast<std::size_t>(y_.size()); }
  std::string name() const override { return "toyhm"; }

  bool factorizes() const override { return true; }
  std::size_t num_blocks() const override { return latent_dim(); }
  std::size_t block_dim() const override { return 1; }
  Vector block_grad_theta(const Vector& theta, std::size_t block,
                          std::span<const double> x_block) const override;
  Vector block_grad_x(const Vector& theta, std::size_t block,
                      std::span<const double> x_block) const override;

  const Vector& data() const { return y_; }
  double sigma2() const { return sigma2_; }

  /// log p_theta(y) = sum_i log N(y_i; theta, 1 + sigma2).
  double log_marginal(double theta) const;

 protected:
  double do_log_joint(const Vector& theta, const Vector& x) const override;
  Vector do_grad_theta(const Vector& theta, const Vector& x) const override;
  Vector do_grad_x(const Vector& theta, const Vector& x) const override;

 private:
  Vector y_;
  double sigma2_;
};

/// Marginal maximum-likelihood estimate of theta: the sample mean of y.
double toyhm_mle(const Vector& y);

struct ToyHMPosterior {
  Vector mean;      ///< per-coordinate posterior mean
  double variance;  ///< shared posterior variance
};

/// Conjugate posterior p_theta(x_i | y_i) = N(mean_i, variance).
ToyHMPosterior toyhm_posterior(double theta, const Vector& y, double sigma2);

/// Spectral radius of the joint Hessian at sigma2 = 1:
///   ((2 + d_x) + sqrt(d_x^2 + 4)) / 2.
double toyhm_lipschitz(std::size_t latent_dim);

/// Draw N observations from the model at (theta, sigma).
Vector toyhm_generate(std::size_t n, double theta, double sigma, std::uint64_t seed);

/// Shift y so that its empirical mean equals `target`.
Vector center_to_mean(const Vector& y, double target);

}  // namespace mpd
