#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpd/extras.hpp"
#include "mpd/model.hpp"
#include "mpd/state.hpp"
#include "mpd/transition.hpp"

namespace mpd {

struct MomentumParams {
  double gamma_theta = 0.7;
  double eta_theta = 403.96;
  double gamma_x = 0.7;
  double eta_x = 403.96;
  double h_theta = 1e-4;
  double h_x = 1e-2;
};

enum class Algorithm { kPGD, kMPDExp, kMPDNC };

/// Where the frozen gradients of an MPD step are evaluated:
///  - kNone:      both blocks at the previous iterate;
///  - kThetaOnly: theta-block at the partial update theta-bar;
///  - kFull:      additionally, the x-block at the fully updated theta.
enum class GradientCorrection { kNone, kThetaOnly, kFull };

struct VariantConfig {
  Algorithm algorithm = Algorithm::kMPDExp;
  bool enrich_theta = true;
  bool enrich_x = true;
  GradientCorrection correction = GradientCorrection::kFull;

  /// Throws ContractViolation unless PGD has both flags off and MPD variants
  /// at least one on.
  void validate() const;

  static VariantConfig pgd() { return {Algorithm::kPGD, false, false, GradientCorrection::kNone}; }
  static VariantConfig mpd() { return {}; }
  static VariantConfig mpd_nc() { return {Algorithm::kMPDNC, true, true, GradientCorrection::kFull}; }
};

std::string to_string(Algorithm algorithm);
std::string to_string(GradientCorrection correction);

/// Per-step execution context. Particle i draws its noise from
/// RngSpec{seed, stream_ids[i], iteration, kStep}: an MPD x-block consumes
/// normals [0, d_x) as xi and [d_x, 2 d_x) as xi', a PGD x-block consumes
/// [0, d_x). Results do not depend on `threads`.
struct StepContext {
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  int threads = 1;
  bool noise = true;
};

/// -(1/M) sum_i grad_theta l(theta, X^i).
Vector grad_free_energy_theta(const LatentModel& model, const Vector& theta,
                              const ParticleCloud& cloud, int threads = 1);

/// theta-bar = theta + (iota_theta / gamma_theta) m.
Vector partial_theta(const Vector& theta, const Vector& m,
                     const TransitionCoefficients<double>& theta_coeffs);

/// One Euler-Maruyama step of particle gradient descent. m and U are untouched.
void pgd_step(const LatentModel& model, ThetaState& state, ParticleCloud& cloud, double h_theta,
              double h_x, const StepContext& ctx, RmsPropState* preconditioner = nullptr);

/// One step of momentum particle descent with the exponential integrator.
/// Components whose enrich flag is off take the PGD update instead.
void mpd_step(const LatentModel& model, ThetaState& state, ParticleCloud& cloud,
              const MomentumParams& params, const VariantConfig& config, const StepContext& ctx,
              RmsPropState* preconditioner = nullptr);

/// One step of MPD-NC: Nesterov (Sutskever form) in theta, with state.m holding
/// the velocity, and the exact frozen-gradient transition in (x, u) evaluated
/// at the updated theta.
void nc_step(const LatentModel& model, ThetaState& state, ParticleCloud& cloud,
             const MomentumParams& params, double mu_theta, const StepContext& ctx);

namespace detail {

/// Exact transition for the listed blocks of every particle (all blocks when
/// `blocks` is empty), with the gradient evaluated at `theta` and the old X.
/// `blocks` requires a factorized model. Noise for coordinate j of particle i
/// is normal j (xi) and d_x + j (xi') of that particle's stream under `rng`.
void exact_x_block(const LatentModel& model, const Vector& theta, ParticleCloud& cloud,
                   const TransitionCoefficients<double>& c, const std::vector<std::size_t>& blocks,
                   std::uint64_t seed, std::uint32_t epoch, RngDomain domain, int threads, bool noise);

/// Euler-Maruyama (PGD) update of the listed blocks; noise is normal j.
void euler_x_block(const LatentModel& model, const Vector& theta, ParticleCloud& cloud, double h,
                   const std::vector<std::size_t>& blocks, std::uint64_t seed, std::uint32_t epoch,
                   RngDomain domain, int threads, bool noise);

}  // namespace detail

}  // namespace mpd
