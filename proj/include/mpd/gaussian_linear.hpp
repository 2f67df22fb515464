#pragma once

#include "mpd/model.hpp"

namespace mpd {

class ToyHM;

/// Jointly quadratic latent model
///   l(theta, x) = -1/2 z^T P z + b^T z + c,   z = (theta, x),
/// with P symmetric positive semi-definite (and P_xx positive definite).
/// The Hessian of l is the constant -P.
class GaussianLinearModel final : public LatentModel {
 public:
  GaussianLinearModel(std::size_t theta_dim, Matrix precision, Vector linear, double constant);

  /// Exact quadratic representation of a ToyHM instance, constants included.
  static GaussianLinearModel from_toyhm(const ToyHM& model);

  std::size_t theta_dim() const override { return d_theta_; }
  std::size_t latent_dim() const override { return static_cast<std::size_t>(b_.size()) - d_theta_; }
  std::string name() const override { return "gaussian_linear"; }

  const Matrix& precision() const { return p_; }
  const Vector& linear() const { return b_; }
  double constant() const { return c_; }

  auto p_tt() const { return p_.topLeftCorner(d_theta_, d_theta_); }
  auto p_tx() const { return p_.topRightCorner(d_theta_, latent_dim()); }
  auto p_xt() const { return p_.bottomLeftCorner(latent_dim(), d_theta_); }
  auto p_xx() const { return p_.bottomRightCorner(latent_dim(), latent_dim()); }
  auto b_t() const { return b_.head(d_theta_); }
  auto b_x() const { return b_.tail(latent_dim()); }

  /// Posterior p_theta(x | y) = N(mean, P_xx^{-1}).
  Vector posterior_mean(const Vector& theta) const;
  Matrix posterior_cov() const;

  /// log p_theta(y) = log \int exp(l(theta, x)) dx.
  double log_marginal(const Vector& theta) const;
  /// argmax_theta log p_theta(y); requires the Schur complement of P_xx to be
  /// positive definite.
  Vector mle() const;

  /// E_{x ~ N(mean, cov)} l(theta, x).
  double expected_log_joint(const Vector& theta, const Vector& mean, const Matrix& cov) const;

 protected:
  double do_log_joint(const Vector& theta, const Vector& x) const override;
  Vector do_grad_theta(const Vector& theta, const Vector& x) const override;
  Vector do_grad_x(const Vector& theta, const Vector& x) const override;

 private:
  std::size_t d_theta_;
  Matrix p_;
  Vector b_;
  double c_;
};

}  // namespace mpd
