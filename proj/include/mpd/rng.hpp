#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>

namespace mpd {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3"). Maps a 128-bit counter and 64-bit key to 128 random bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Purpose tag folded into the counter so that draws made for different
/// reasons never collide, whatever the iteration or particle.
enum class RngDomain : std::uint32_t {
  kStep = 0,      ///< transition noise of a regular step
  kInit = 1,      ///< particle-cloud initialization
  kCatchUp = 2,   ///< subsampling catch-up noise
  kMetric = 3,    ///< sampling used by diagnostics
  kData = 4,      ///< synthetic dataset generation
  kTheta = 5,     ///< parameter initialization
  kOracle = 6,    ///< Monte Carlo oracles
};

/// Identifies one reproducible stream of standard normals.
///
/// The n-th normal of a stream is a pure function of (seed, stream, epoch,
/// domain, n); nothing is carried between calls, so any subset of a stream can
/// be regenerated independently and in any order.
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint32_t stream = 0;
  std::uint32_t epoch = 0;
  RngDomain domain = RngDomain::kStep;
};

/// Sequential reader over an RngSpec stream.
class NormalStream {
 public:
  explicit NormalStream(RngSpec spec, std::uint64_t position = 0)
      : spec_(spec), position_(position) {}

  double next();
  /// Uniform on (0, 1); consumes one normal slot.
  double next_uniform();
  void fill(Eigen::Ref<Eigen::VectorXd> out);
  Eigen::VectorXd draw(Eigen::Index n);

  std::uint64_t position() const { return position_; }
  void seek(std::uint64_t position) { position_ = position; }

 private:
  RngSpec spec_;
  std::uint64_t position_;
  std::uint64_t cached_pair_ = ~std::uint64_t{0};
  std::array<double, 2> cached_{};
};

/// The n-th standard normal of the stream (random access).
double normal_at(const RngSpec& spec, std::uint64_t n);
/// The n-th uniform on the open interval (0, 1).
double uniform_at(const RngSpec& spec, std::uint64_t n);

/// n i.i.d. standard normals from the start of the stream.
Eigen::VectorXd gaussian_draw(const RngSpec& spec, Eigen::Index n);

}  // namespace mpd
