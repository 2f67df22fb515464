#include "mpd/integrators.hpp"

#include <cmath>

namespace mpd {

void VariantConfig::validate() const {
  if (algorithm == Algorithm::kPGD) {
    require(!enrich_theta && !enrich_x, "PGD must not enable momentum enrichment");
  } else {
    require(enrich_theta || enrich_x, "MPD variants need at least one enriched component");
  }
  require(algorithm != Algorithm::kMPDNC || (enrich_theta && enrich_x),
          "MPD-NC enriches both components");
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kPGD: return "pgd";
    case Algorithm::kMPDExp: return "mpd";
    case Algorithm::kMPDNC: return "mpd_nc";
  }
  return "?";
}

std::string to_string(GradientCorrection correction) {
  switch (correction) {
    case GradientCorrection::kNone: return "none";
    case GradientCorrection::kThetaOnly: return "theta_only";
    case GradientCorrection::kFull: return "full";
  }
  return "?";
}

Vector grad_free_energy_theta(const LatentModel& model, const Vector& theta,
                              const ParticleCloud& cloud, int threads) {
  const Eigen::Index m = cloud.size();
  require(m >= 1, "grad_free_energy_theta: empty cloud");
  // Checked here because an exception cannot leave the parallel region.
  require(static_cast<std::size_t>(cloud.dim()) == model.latent_dim() &&
              static_cast<std::size_t>(theta.size()) == model.theta_dim(),
          "grad_free_energy_theta: cloud or theta does not match the model");
  const auto d = static_cast<Eigen::Index>(model.theta_dim());
  // Per-particle gradients first, then a fixed-order sum, so the result is
  // independent of the thread count.
  Matrix per_particle(d, m);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (Eigen::Index i = 0; i < m; ++i) {
    per_particle.col(i) = model.grad_theta(theta, cloud.X.row(i).transpose());
  }
  Vector sum = Vector::Zero(d);
  for (Eigen::Index i = 0; i < m; ++i) sum += per_particle.col(i);
  return -sum / static_cast<double>(m);
}

Vector partial_theta(const Vector& theta, const Vector& m,
                     const TransitionCoefficients<double>& theta_coeffs) {
  require(theta.size() == m.size(), "partial_theta: theta and m differ in size");
  return theta + theta_coeffs.pos_mom_weight * m;
}

namespace detail {

namespace {

void check_cloud(const LatentModel& model, const ParticleCloud& cloud) {
  require(cloud.size() >= 1, "empty particle cloud");
  require(static_cast<std::size_t>(cloud.dim()) == model.latent_dim() && cloud.U.rows() == cloud.size() &&
              cloud.U.cols() == cloud.dim() &&
              static_cast<Eigen::Index>(cloud.stream_ids.size()) == cloud.size(),
          "particle cloud does not match the model");
}

}  // namespace

void exact_x_block(const LatentModel& model, const Vector& theta, ParticleCloud& cloud,
                   const TransitionCoefficients<double>& c, const std::vector<std::size_t>& blocks,
                   std::uint64_t seed, std::uint32_t epoch, RngDomain domain, int threads, bool noise) {
  check_cloud(model, cloud);
  require(blocks.empty() || model.factorizes(), "block updates need a factorized model");
  const Eigen::Index m = cloud.size();
  const Eigen::Index d = cloud.dim();
  const auto bd = static_cast<Eigen::Index>(model.block_dim());

#pragma omp parallel for schedule(static) num_threads(threads)
  for (Eigen::Index i = 0; i < m; ++i) {
    const RngSpec rng{seed, cloud.stream_ids[static_cast<std::size_t>(i)], epoch, domain};
    auto x = cloud.X.row(i);
    auto u = cloud.U.row(i);
    if (blocks.empty()) {
      const Vector g = model.grad_x(theta, x.transpose());
      NormalStream normals(rng);
      Vector xi = Vector::Zero(d);
      Vector xi_prime = Vector::Zero(d);
      if (noise) {
        normals.fill(xi);
        normals.fill(xi_prime);
      }
      const Vector u_old = u.transpose();
      x += (c.pos_mom_weight * u_old + c.drift_pos_weight * g + c.L_xx * xi).transpose();
      u = (c.omega * u_old + c.drift_mom_weight * g + c.L_xu * xi + c.L_uu * xi_prime).transpose();
    } else {
      for (const std::size_t b : blocks) {
        const Eigen::Index start = static_cast<Eigen::Index>(b) * bd;
        const Vector g = model.block_grad_x(theta, b, std::span<const double>(&x[start], static_cast<std::size_t>(bd)));
        for (Eigen::Index k = 0; k < bd; ++k) {
          const Eigen::Index j = start + k;
          const double xi = noise ? normal_at(rng, static_cast<std::uint64_t>(j)) : 0.0;
          const double xi_prime = noise ? normal_at(rng, static_cast<std::uint64_t>(d + j)) : 0.0;
          const double u_old = u[j];
          x[j] += c.pos_mom_weight * u_old + c.drift_pos_weight * g[k] + c.L_xx * xi;
          u[j] = c.omega * u_old + c.drift_mom_weight * g[k] + c.L_xu * xi + c.L_uu * xi_prime;
        }
      }
    }
  }
}

void euler_x_block(const LatentModel& model, const Vector& theta, ParticleCloud& cloud, double h,
                   const std::vector<std::size_t>& blocks, std::uint64_t seed, std::uint32_t epoch,
                   RngDomain domain, int threads, bool noise) {
  check_cloud(model, cloud);
  require(h > 0.0, "step size must be positive");
  require(blocks.empty() || model.factorizes(), "block updates need a factorized model");
  const Eigen::Index m = cloud.size();
  const Eigen::Index d = cloud.dim();
  const auto bd = static_cast<Eigen::Index>(model.block_dim());
  const double noise_scale = std::sqrt(2.0 * h);

#pragma omp parallel for schedule(static) num_threads(threads)
  for (Eigen::Index i = 0; i < m; ++i) {
    const RngSpec rng{seed, cloud.stream_ids[static_cast<std::size_t>(i)], epoch, domain};
    auto x = cloud.X.row(i);
    if (blocks.empty()) {
      const Vector g = model.grad_x(theta, x.transpose());
      Vector xi = Vector::Zero(d);
      if (noise) NormalStream(rng).fill(xi);
      x += (h * g + noise_scale * xi).transpose();
    } else {
      for (const std::size_t b : blocks) {
        const Eigen::Index start = static_cast<Eigen::Index>(b) * bd;
        const Vector g = model.block_grad_x(theta, b, std::span<const double>(&x[start], static_cast<std::size_t>(bd)));
        for (Eigen::Index k = 0; k < bd; ++k) {
          const Eigen::Index j = start + k;
          const double xi = noise ? normal_at(rng, static_cast<std::uint64_t>(j)) : 0.0;
          x[j] += h * g[k] + noise_scale * xi;
        }
      }
    }
  }
}

}  // namespace detail

namespace {

Vector maybe_precondition(const Vector& grad, RmsPropState* preconditioner) {
  if (preconditioner == nullptr) return grad;
  *preconditioner = rmsprop_update(*preconditioner, grad);
  return precondition(grad, *preconditioner);
}

void check_state(const LatentModel& model, const ThetaState& state) {
  require(static_cast<std::size_t>(state.theta.size()) == model.theta_dim() &&
              state.m.size() == state.theta.size(),
          "theta state does not match the model");
}

}  // namespace

void pgd_step(const LatentModel& model, ThetaState& state, ParticleCloud& cloud, double h_theta,
              double h_x, const StepContext& ctx, RmsPropState* preconditioner) {
  check_state(model, state);
  require(h_theta > 0.0 && h_x > 0.0, "pgd_step: step sizes must be positive");
  const Vector theta_old = state.theta;
  const Vector grad = maybe_precondition(grad_free_energy_theta(model, theta_old, cloud, ctx.threads),
                                         preconditioner);
  state.theta = theta_old - h_theta * grad;
  detail::euler_x_block(model, theta_old, cloud, h_x, {}, ctx.seed,
                        static_cast<std::uint32_t>(ctx.iteration), RngDomain::kStep, ctx.threads,
                        ctx.noise);
}

void mpd_step(const LatentModel& model, ThetaState& state, ParticleCloud& cloud,
              const MomentumParams& params, const VariantConfig& config, const StepContext& ctx,
              RmsPropState* preconditioner) {
  config.validate();
  require(config.algorithm == Algorithm::kMPDExp, "mpd_step: algorithm must be MPD (exponential)");
  check_state(model, state);
  require(params.h_theta > 0.0 && params.h_x > 0.0, "mpd_step: step sizes must be positive");
  if (config.enrich_theta) {
    require(params.gamma_theta * params.eta_theta > 0.0,
            "mpd_step: gamma_theta * eta_theta must be positive on an enriched component");
  }
  if (config.enrich_x) {
    require(params.gamma_x * params.eta_x > 0.0,
            "mpd_step: gamma_x * eta_x must be positive on an enriched component");
  }

  const Vector theta_old = state.theta;
  if (config.enrich_theta) {
    const auto c = transition_coefficients(params.gamma_theta, params.eta_theta, params.h_theta);
    const Vector anchor = config.correction == GradientCorrection::kNone
                              ? theta_old
                              : partial_theta(theta_old, state.m, c);
    const Vector grad = maybe_precondition(
        grad_free_energy_theta(model, anchor, cloud, ctx.threads), preconditioner);
    state.theta = theta_old + c.pos_mom_weight * state.m - c.drift_pos_weight * grad;
    state.m = c.omega * state.m - c.drift_mom_weight * grad;
  } else {
    const Vector grad = maybe_precondition(
        grad_free_energy_theta(model, theta_old, cloud, ctx.threads), preconditioner);
    state.theta = theta_old - params.h_theta * grad;
  }

  const Vector& x_anchor = config.correction == GradientCorrection::kFull ? state.theta : theta_old;
  const auto epoch = static_cast<std::uint32_t>(ctx.iteration);
  if (config.enrich_x) {
    const auto c = transition_coefficients(params.gamma_x, params.eta_x, params.h_x);
    detail::exact_x_block(model, x_anchor, cloud, c, {}, ctx.seed, epoch, RngDomain::kStep,
                          ctx.threads, ctx.noise);
  } else {
    detail::euler_x_block(model, x_anchor, cloud, params.h_x, {}, ctx.seed, epoch,
                          RngDomain::kStep, ctx.threads, ctx.noise);
  }
}

void nc_step(const LatentModel& model, ThetaState& state, ParticleCloud& cloud,
             const MomentumParams& params, double mu_theta, const StepContext& ctx) {
  check_state(model, state);
  require(mu_theta >= 0.0 && mu_theta < 1.0, "nc_step: mu must lie in [0, 1)");
  require(params.h_theta > 0.0 && params.h_x > 0.0, "nc_step: step sizes must be positive");
  require(params.gamma_x * params.eta_x > 0.0, "nc_step: gamma_x * eta_x must be positive");

  const Vector look_ahead = state.theta + mu_theta * state.m;
  const Vector grad = grad_free_energy_theta(model, look_ahead, cloud, ctx.threads);
  state.m = mu_theta * state.m - params.h_theta * params.h_theta * grad;
  state.theta += state.m;

  const auto c = transition_coefficients(params.gamma_x, params.eta_x, params.h_x);
  detail::exact_x_block(model, state.theta, cloud, c, {}, ctx.seed,
                        static_cast<std::uint32_t>(ctx.iteration), RngDomain::kStep, ctx.threads,
                        ctx.noise);
}

}  // namespace mpd
