#include "mpd/subsampling.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace mpd {

namespace {

// Stream id reserved for batch selection; particle streams start at 0.
constexpr std::uint32_t kBatchStream = 0xFFFFFFFFu;

Vector maybe_precondition(const Vector& grad, RmsPropState* preconditioner) {
  if (preconditioner == nullptr) return grad;
  *preconditioner = rmsprop_update(*preconditioner, grad);
  return precondition(grad, *preconditioner);
}

bool nothing_missed(const ParticleCloud& cloud) {
  return std::all_of(cloud.missed.begin(), cloud.missed.end(), [](auto v) { return v == 0; });
}

}  // namespace

void SubsampleSchedule::validate() const {
  require(data >= 1, "subsampling: dataset must be nonempty");
  require(batch >= 1 && batch <= data, "subsampling: batch size must lie in [1, N]");
}

std::vector<std::size_t> SubsampleSchedule::draw(std::uint64_t seed, std::uint64_t iteration) const {
  validate();
  std::vector<std::size_t> perm(data);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  const RngSpec rng{seed, kBatchStream, static_cast<std::uint32_t>(iteration), RngDomain::kCatchUp};
  for (std::size_t i = 0; i < batch; ++i) {
    const double u = uniform_at(rng, i);
    const std::size_t j = i + std::min(data - i - 1, static_cast<std::size_t>(u * static_cast<double>(data - i)));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(batch);
  std::sort(perm.begin(), perm.end());
  return perm;
}

Vector minibatch_grad_free_energy_theta(const LatentModel& model, const Vector& theta,
                                        const ParticleCloud& cloud,
                                        const std::vector<std::size_t>& batch, int threads) {
  require(model.factorizes(), "subsampling needs a model that factorizes over data");
  require(!batch.empty(), "subsampling: empty batch");
  const Eigen::Index m = cloud.size();
  require(m >= 1, "minibatch gradient: empty cloud");
  require(static_cast<std::size_t>(cloud.dim()) == model.latent_dim() &&
              static_cast<std::size_t>(theta.size()) == model.theta_dim(),
          "minibatch gradient: cloud or theta does not match the model");
  for (const std::size_t b : batch) require(b < model.num_blocks(), "minibatch gradient: index out of range");
  const auto d = static_cast<Eigen::Index>(model.theta_dim());
  const auto bd = model.block_dim();
  Matrix per_particle = Matrix::Zero(d, m);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (Eigen::Index i = 0; i < m; ++i) {
    const double* row = cloud.X.row(i).data();
    for (const std::size_t b : batch) {
      per_particle.col(i) += model.block_grad_theta(theta, b, std::span<const double>(row + b * bd, bd));
    }
  }
  Vector sum = Vector::Zero(d);
  for (Eigen::Index i = 0; i < m; ++i) sum += per_particle.col(i);
  const double scale = static_cast<double>(model.num_blocks()) / static_cast<double>(batch.size());
  return -scale * sum / static_cast<double>(m);
}

void subsampled_step(const LatentModel& model, ThetaState& state, ParticleCloud& cloud,
                     const MomentumParams& params, const VariantConfig& config,
                     const std::vector<std::size_t>& batch_in, const StepContext& ctx,
                     const SubsampleOptions& options, RmsPropState* preconditioner) {
  config.validate();
  require(model.factorizes(), "subsampling needs a model that factorizes over data");
  require(!batch_in.empty(), "subsampling: empty batch");
  const std::size_t n = model.num_blocks();
  if (cloud.missed.size() != n) {
    require(cloud.missed.empty(), "subsampling: missed counters do not match the dataset");
    cloud.missed.assign(n, 0);
  }
  std::vector<std::size_t> batch = batch_in;
  std::sort(batch.begin(), batch.end());
  require(std::adjacent_find(batch.begin(), batch.end()) == batch.end(),
          "subsampling: duplicate batch indices");
  require(batch.back() < n, "subsampling: batch index out of range");

  if (batch.size() == n && nothing_missed(cloud)) {
    switch (config.algorithm) {
      case Algorithm::kPGD:
        pgd_step(model, state, cloud, params.h_theta, params.h_x, ctx, preconditioner);
        return;
      case Algorithm::kMPDExp:
        mpd_step(model, state, cloud, params, config, ctx, preconditioner);
        return;
      case Algorithm::kMPDNC:
        nc_step(model, state, cloud, params, options.nc_mu, ctx);
        return;
    }
  }

  const bool exact_x = config.algorithm != Algorithm::kPGD && config.enrich_x;
  const auto epoch = static_cast<std::uint32_t>(ctx.iteration);

  // (i) catch-up of the batch's latents at the current theta.
  std::map<std::uint64_t, std::vector<std::size_t>> by_missed;
  for (const std::size_t b : batch) {
    if (cloud.missed[b] > 0) by_missed[cloud.missed[b]].push_back(b);
  }
  for (const auto& [missed, blocks] : by_missed) {
    if (options.catch_up == CatchUpMode::kSingle) {
      const double t = params.h_x * static_cast<double>(missed);
      if (exact_x) {
        detail::exact_x_block(model, state.theta, cloud,
                              transition_coefficients(params.gamma_x, params.eta_x, t), blocks,
                              ctx.seed, epoch, RngDomain::kCatchUp, ctx.threads, ctx.noise);
      } else {
        detail::euler_x_block(model, state.theta, cloud, t, blocks, ctx.seed, epoch,
                              RngDomain::kCatchUp, ctx.threads, ctx.noise);
      }
    } else {
      const auto coeffs = exact_x ? transition_coefficients(params.gamma_x, params.eta_x, params.h_x)
                                  : TransitionCoefficients<double>{};
      for (std::uint64_t r = missed; r >= 1; --r) {
        const auto replay = static_cast<std::uint32_t>(ctx.iteration - r);
        if (exact_x) {
          detail::exact_x_block(model, state.theta, cloud, coeffs, blocks, ctx.seed, replay,
                                RngDomain::kStep, ctx.threads, ctx.noise);
        } else {
          detail::euler_x_block(model, state.theta, cloud, params.h_x, blocks, ctx.seed, replay,
                                RngDomain::kStep, ctx.threads, ctx.noise);
        }
      }
    }
  }
  // (ii)
  for (const std::size_t b : batch) cloud.missed[b] = 0;

  // (iii) one step restricted to the batch.
  auto grad_at = [&](const Vector& theta) {
    return minibatch_grad_free_energy_theta(model, theta, cloud, batch, ctx.threads);
  };
  const Vector theta_old = state.theta;
  Vector x_anchor = theta_old;
  switch (config.algorithm) {
    case Algorithm::kPGD:
      state.theta = theta_old - params.h_theta * maybe_precondition(grad_at(theta_old), preconditioner);
      break;
    case Algorithm::kMPDExp:
      if (config.enrich_theta) {
        const auto c = transition_coefficients(params.gamma_theta, params.eta_theta, params.h_theta);
        const Vector anchor = config.correction == GradientCorrection::kNone
                                  ? theta_old
                                  : partial_theta(theta_old, state.m, c);
        const Vector grad = maybe_precondition(grad_at(anchor), preconditioner);
        state.theta = theta_old + c.pos_mom_weight * state.m - c.drift_pos_weight * grad;
        state.m = c.omega * state.m - c.drift_mom_weight * grad;
      } else {
        state.theta = theta_old - params.h_theta * maybe_precondition(grad_at(theta_old), preconditioner);
      }
      if (config.correction == GradientCorrection::kFull) x_anchor = state.theta;
      break;
    case Algorithm::kMPDNC: {
      require(options.nc_mu >= 0.0 && options.nc_mu < 1.0, "nc_step: mu must lie in [0, 1)");
      const Vector grad = grad_at(theta_old + options.nc_mu * state.m);
      state.m = options.nc_mu * state.m - params.h_theta * params.h_theta * grad;
      state.theta += state.m;
      x_anchor = state.theta;
      break;
    }
  }
  if (exact_x) {
    detail::exact_x_block(model, x_anchor, cloud,
                          transition_coefficients(params.gamma_x, params.eta_x, params.h_x), batch,
                          ctx.seed, epoch, RngDomain::kStep, ctx.threads, ctx.noise);
  } else {
    detail::euler_x_block(model, x_anchor, cloud, params.h_x, batch, ctx.seed, epoch,
                          RngDomain::kStep, ctx.threads, ctx.noise);
  }

  // (iv)
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (next < batch.size() && batch[next] == i) {
      ++next;
    } else {
      ++cloud.missed[i];
    }
  }
}

}  // namespace mpd
