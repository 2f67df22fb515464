#pragma once

#include <cstdint>
#include <vector>

#include "mpd/integrators.hpp"

namespace mpd {

/// How a datum that skipped `missed` steps is brought up to date.
enum class CatchUpMode {
  kSingle,    ///< one transition of length h_x * missed, fresh catch-up noise
  kRepeated,  ///< `missed` transitions of length h_x, replaying the skipped epochs' noise
};

/// Uniform mini-batches of B out of N data, drawn without replacement.
struct SubsampleSchedule {
  std::size_t batch = 1;
  std::size_t data = 1;

  void validate() const;
  /// Sorted batch for the given iteration; a pure function of (seed, iteration).
  std::vector<std::size_t> draw(std::uint64_t seed, std::uint64_t iteration) const;
};

struct SubsampleOptions {
  CatchUpMode catch_up = CatchUpMode::kSingle;
  double nc_mu = 0.0;  ///< momentum coefficient, MPD-NC only
};

/// Mini-batch estimate of the theta-gradient of the free energy:
///   -(N / B) (1/M) sum_particles sum_{i in batch} grad_theta l_i.
Vector minibatch_grad_free_energy_theta(const LatentModel& model, const Vector& theta,
                                        const ParticleCloud& cloud,
                                        const std::vector<std::size_t>& batch, int threads = 1);

/// One subsampled step: catch up the latents of the batch, reset their
/// counters, take one step restricted to the batch with a rescaled
/// mini-batch theta-gradient, then count a miss for every other datum.
/// A full batch with nothing to catch up is exactly the regular step.
void subsampled_step(const LatentModel& model, ThetaState& state, ParticleCloud& cloud,
                     const MomentumParams& params, const VariantConfig& config,
                     const std::vector<std::size_t>& batch, const StepContext& ctx,
                     const SubsampleOptions& options = {}, RmsPropState* preconditioner = nullptr);

}  // namespace mpd
