#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "mpd/model.hpp"
#include "mpd/rng.hpp"

namespace mpd {

/// Parameter and its momentum, the deterministic half of the system.
/// For MPD-NC the momentum slot holds the Nesterov velocity v.
struct ThetaState {
  Vector theta;
  Vector m;
};

/// M particles approximating q_t over (x, u). Row i of X and U is particle i.
///
/// `missed` counts, per data block of a factorized model, how many steps that
/// block's latents have skipped under subsampling; all particles share it.
struct ParticleCloud {
  RowMatrix X;
  RowMatrix U;
  std::vector<std::uint32_t> stream_ids;
  std::vector<std::uint64_t> missed;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }
};

/// Distribution of the initial cloud.
struct CloudInit {
  enum class Kind { kPointMass, kGaussian };
  Kind kind = Kind::kGaussian;
  Vector mean;          ///< size d_x, or size 1 to broadcast
  double stddev = 1.0;  ///< isotropic standard deviation (Gaussian only)
  /// If set, U_0 ~ N(0, 1/momentum_precision I); otherwise U_0 = 0.
  std::optional<double> momentum_precision;
};

/// theta = theta0, m = 0, X ~ init i.i.d., U per init, missed = 0,
/// stream ids 0..M-1.
std::pair<ThetaState, ParticleCloud> init_state(const LatentModel& model, std::size_t particles,
                                                const Vector& theta0, const CloudInit& init,
                                                std::uint64_t seed);

struct Checkpoint {
  ThetaState state;
  ParticleCloud cloud;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
};

/// JSON text round trip; doubles are written with round-trip precision.
std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mpd
