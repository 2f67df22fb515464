#include "mpd/oracle.hpp"

#include <cmath>

#include "mpd/toy_hm.hpp"

namespace mpd {

std::pair<Vector, Vector> em_fine_simulate(const Vector& x0, const Vector& u0, const Vector& g,
                                           double gamma, double eta, double t, std::size_t substeps,
                                           RngSpec rng) {
  require(substeps >= 1, "em_fine_simulate: substeps must be at least 1");
  require(x0.size() == u0.size() && x0.size() == g.size(),
          "em_fine_simulate: x0, u0 and g must have equal sizes");
  require(gamma >= 0.0 && eta >= 0.0 && t >= 0.0, "em_fine_simulate: negative gamma, eta or t");
  const double dt = t / static_cast<double>(substeps);
  const double noise_scale = std::sqrt(2.0 * gamma * dt);
  Vector x = x0;
  Vector u = u0;
  Vector xi(x0.size());
  NormalStream normals(rng);
  for (std::size_t s = 0; s < substeps; ++s) {
    normals.fill(xi);
    const Vector u_old = u;
    u += dt * (g - gamma * eta * u_old) + noise_scale * xi;
    x += dt * eta * u_old;
  }
  return {x, u};
}

Matrix dense_hessian(const LatentModel& model) {
  if (const auto* gl = dynamic_cast<const GaussianLinearModel*>(&model)) return -gl->precision();
  if (const auto* hm = dynamic_cast<const ToyHM*>(&model)) {
    return -GaussianLinearModel::from_toyhm(*hm).precision();
  }
  throw ContractViolation("dense_hessian: " + model.name() + " is not a quadratic model");
}

GaussianFlowState gaussian_flow_derivative(const GaussianLinearModel& model,
                                           const MomentumParams& params,
                                           const GaussianFlowState& s) {
  const auto d = static_cast<Eigen::Index>(model.latent_dim());
  const auto mean_x = s.mean.head(d);
  const auto mean_u = s.mean.tail(d);
  const double rate_x = params.gamma_x * params.eta_x;

  Matrix f_mat = Matrix::Zero(2 * d, 2 * d);
  f_mat.topRightCorner(d, d).diagonal().setConstant(params.eta_x);
  f_mat.bottomLeftCorner(d, d) = -model.p_xx();
  f_mat.bottomRightCorner(d, d).diagonal().setConstant(-rate_x);

  GaussianFlowState ds;
  ds.theta = params.eta_theta * s.m;
  ds.m = -model.p_tt() * s.theta - model.p_tx() * mean_x + model.b_t() -
         params.gamma_theta * params.eta_theta * s.m;
  ds.mean.resize(2 * d);
  ds.mean.head(d) = params.eta_x * mean_u;
  ds.mean.tail(d) = -model.p_xx() * mean_x - rate_x * mean_u + model.b_x() - model.p_xt() * s.theta;
  ds.cov = f_mat * s.cov;
  ds.cov += ds.cov.transpose().eval();
  ds.cov.bottomRightCorner(d, d).diagonal().array() += 2.0 * params.gamma_x;
  return ds;
}

namespace {

GaussianFlowState axpy(const GaussianFlowState& s, double a, const GaussianFlowState& ds) {
  return {s.theta + a * ds.theta, s.m + a * ds.m, s.mean + a * ds.mean, s.cov + a * ds.cov};
}

void check_flow_state(const GaussianLinearModel& model, const GaussianFlowState& s) {
  const auto d = static_cast<Eigen::Index>(model.latent_dim());
  const auto p = static_cast<Eigen::Index>(model.theta_dim());
  require(s.theta.size() == p && s.m.size() == p, "moment flow: theta or m has the wrong size");
  require(s.mean.size() == 2 * d && s.cov.rows() == 2 * d && s.cov.cols() == 2 * d,
          "moment flow: moments must cover (x, u)");
}

}  // namespace

std::vector<GaussianFlowSample> gaussian_moment_flow(const GaussianLinearModel& model,
                                                     const MomentumParams& params,
                                                     const GaussianFlowState& init, double t_end,
                                                     double dt, std::size_t record_every) {
  check_flow_state(model, init);
  require(dt > 0.0 && t_end >= 0.0, "moment flow: dt must be positive and t_end non-negative");
  require(record_every >= 1, "moment flow: record_every must be at least 1");
  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  std::vector<GaussianFlowSample> out{{0.0, init}};
  GaussianFlowState s = init;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double h = std::min(dt, t_end - static_cast<double>(k - 1) * dt);
    const auto k1 = gaussian_flow_derivative(model, params, s);
    const auto k2 = gaussian_flow_derivative(model, params, axpy(s, h / 2, k1));
    const auto k3 = gaussian_flow_derivative(model, params, axpy(s, h / 2, k2));
    const auto k4 = gaussian_flow_derivative(model, params, axpy(s, h, k3));
    s.theta += h / 6 * (k1.theta + 2 * k2.theta + 2 * k3.theta + k4.theta);
    s.m += h / 6 * (k1.m + 2 * k2.m + 2 * k3.m + k4.m);
    s.mean += h / 6 * (k1.mean + 2 * k2.mean + 2 * k3.mean + k4.mean);
    s.cov += h / 6 * (k1.cov + 2 * k2.cov + 2 * k3.cov + k4.cov);
    s.cov = (0.5 * (s.cov + s.cov.transpose())).eval();
    if (Eigen::LLT<Matrix>(s.cov).info() != Eigen::Success || !s.cov.allFinite()) {
      throw StepSizeError("moment flow: covariance lost positive definiteness at t = " +
                          std::to_string(static_cast<double>(k) * dt) + "; reduce dt");
    }
    if (k % record_every == 0 || k == steps) out.push_back({std::min(t_end, static_cast<double>(k) * dt), s});
  }
  return out;
}

GaussianFlowState gaussian_flow_minimizer(const GaussianLinearModel& model,
                                          const MomentumParams& params) {
  require(params.eta_x > 0.0, "moment flow: eta_x must be positive");
  const auto d = static_cast<Eigen::Index>(model.latent_dim());
  GaussianFlowState s;
  s.theta = model.mle();
  s.m = Vector::Zero(s.theta.size());
  s.mean = Vector::Zero(2 * d);
  s.mean.head(d) = model.posterior_mean(s.theta);
  s.cov = Matrix::Zero(2 * d, 2 * d);
  s.cov.topLeftCorner(d, d) = model.posterior_cov();
  s.cov.bottomRightCorner(d, d).diagonal().setConstant(1.0 / params.eta_x);
  return s;
}

}  // namespace mpd
