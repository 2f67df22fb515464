#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "mpd/errors.hpp"

namespace mpd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A latent-variable model evaluated for a fixed dataset y:
///   l(theta, x) = log p_theta(y, x),   theta in R^{d_theta}, x in R^{d_x}.
///
/// Implementations must be pure: evaluation may run concurrently from many
/// threads on one shared instance.
class LatentModel {
 public:
  virtual ~LatentModel() = default;

  virtual std::size_t theta_dim() const = 0;
  virtual std::size_t latent_dim() const = 0;
  virtual std::string name() const = 0;

  double log_joint(const Vector& theta, const Vector& x) const {
    check_dims(theta, x);
    return do_log_joint(theta, x);
  }
  Vector grad_theta(const Vector& theta, const Vector& x) const {
    check_dims(theta, x);
    return do_grad_theta(theta, x);
  }
  Vector grad_x(const Vector& theta, const Vector& x) const {
    check_dims(theta, x);
    return do_grad_x(theta, x);
  }

  /// Models whose joint factorizes over data, l = sum_i l_i(theta, x_i) with
  /// x_i a contiguous block of block_dim() coordinates, return true here and
  /// implement the per-block gradients. Subsampling requires it.
  virtual bool factorizes() const { return false; }
  virtual std::size_t num_blocks() const { return 1; }
  virtual std::size_t block_dim() const { return latent_dim(); }

  /// grad_theta of the i-th factor, evaluated on that factor's latent block.
  virtual Vector block_grad_theta(const Vector& theta, std::size_t block,
                                  std::span<const double> x_block) const;
  /// grad_x of the i-th factor with respect to its latent block.
  virtual Vector block_grad_x(const Vector& theta, std::size_t block,
                              std::span<const double> x_block) const;

 protected:
  virtual double do_log_joint(const Vector& theta, const Vector& x) const = 0;
  virtual Vector do_grad_theta(const Vector& theta, const Vector& x) const = 0;
  virtual Vector do_grad_x(const Vector& theta, const Vector& x) const = 0;

 private:
  void check_dims(const Vector& theta, const Vector& x) const {
    if (static_cast<std::size_t>(theta.size()) != theta_dim() ||
        static_cast<std::size_t>(x.size()) != latent_dim()) {
      throw ContractViolation(name() + ": expected theta of size " + std::to_string(theta_dim()) +
                              " and x of size " + std::to_string(latent_dim()) + ", got " +
                              std::to_string(theta.size()) + " and " + std::to_string(x.size()));
    }
  }
};

/// log N(value; mean, variance) for scalars.
inline double log_normal_pdf(double value, double mean, double variance) {
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  const double r = value - mean;
  return -0.5 * (kLog2Pi + std::log(variance) + r * r / variance);
}

}  // namespace mpd
