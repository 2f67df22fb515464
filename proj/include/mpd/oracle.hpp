#pragma once

#include <utility>
#include <vector>

#include "mpd/gaussian_linear.hpp"
#include "mpd/integrators.hpp"
#include "mpd/rng.hpp"

namespace mpd {

/// Linear log-density l(theta, x) = g^T x: the x-gradient is the constant g,
/// which freezes the drift of the x-block at a chosen value.
class FrozenGradientModel final : public LatentModel {
 public:
  explicit FrozenGradientModel(Vector g) : g_(std::move(g)) {}

  std::size_t theta_dim() const override { return 1; }
  std::size_t latent_dim() const override { return static_cast<std::size_t>(g_.size()); }
  std::string name() const override { return "frozen_gradient"; }

  bool factorizes() const override { return true; }
  std::size_t num_blocks() const override { return latent_dim(); }
  std::size_t block_dim() const override { return 1; }
  Vector block_grad_theta(const Vector&, std::size_t, std::span<const double>) const override {
    return Vector::Zero(1);
  }
  Vector block_grad_x(const Vector&, std::size_t block, std::span<const double>) const override {
    return Vector::Constant(1, g_[static_cast<Eigen::Index>(block)]);
  }

 protected:
  double do_log_joint(const Vector&, const Vector& x) const override { return g_.dot(x); }
  Vector do_grad_theta(const Vector&, const Vector&) const override { return Vector::Zero(1); }
  Vector do_grad_x(const Vector&, const Vector&) const override { return g_; }

 private:
  Vector g_;
};

/// Euler-Maruyama path of the frozen-gradient linear SDE
///   dX = eta U dt,  dU = (g - gamma eta U) dt + sqrt(2 gamma) dW
/// over [0, t] with `substeps` equal steps. Consumes d normals per substep.
std::pair<Vector, Vector> em_fine_simulate(const Vector& x0, const Vector& u0, const Vector& g,
                                           double gamma, double eta, double t, std::size_t substeps,
                                           RngSpec rng);

/// Constant Hessian of l over (theta, x) for quadratic models (ToyHM or
/// GaussianLinearModel). Throws ContractViolation for anything else.
Matrix dense_hessian(const LatentModel& model);

/// Gaussian member of the momentum-enriched flow: theta, m and the joint
/// moments of q over w = (x, u).
struct GaussianFlowState {
  Vector theta;
  Vector m;
  Vector mean;  ///< size 2 d_x
  Matrix cov;   ///< (2 d_x)^2, symmetric positive definite
};

struct GaussianFlowSample {
  double time = 0.0;
  GaussianFlowState state;
};

/// Time derivative of the moments under the damped Hamiltonian flow for a
/// quadratic model:
///   theta' = eta_theta m
///   m'     = E_q grad_theta l - gamma_theta eta_theta m
///   mean'  = F mean + f(theta),  cov' = F cov + cov F^T + diag(0, 2 gamma_x I)
/// with F = [[0, eta_x I], [-P_xx, -gamma_x eta_x I]], f = (0, b_x - P_xt theta).
GaussianFlowState gaussian_flow_derivative(const GaussianLinearModel& model,
                                           const MomentumParams& params,
                                           const GaussianFlowState& state);

/// Integrates the moment ODEs with classical RK4, symmetrizing the covariance
/// after every step. Returns the initial state and every `record_every`-th
/// step, always including the last. Throws StepSizeError if the covariance
/// stops being positive definite.
std::vector<GaussianFlowSample> gaussian_moment_flow(const GaussianLinearModel& model,
                                                     const MomentumParams& params,
                                                     const GaussianFlowState& init, double t_end,
                                                     double dt, std::size_t record_every = 1);

/// The global minimizer of the momentum-enriched free energy: theta at the
/// MLE, m = 0, x-marginal at the posterior and u-marginal N(0, I / eta_x).
GaussianFlowState gaussian_flow_minimizer(const GaussianLinearModel& model,
                                          const MomentumParams& params);

}  // namespace mpd
