#pragma once

#include <cstdint>

#include "mpd/model.hpp"
#include "mpd/rng.hpp"

namespace mpd {

enum class OutputActivation { kIdentity, kTanh };

struct TinyDecoderShape {
  std::size_t latent_per_datum = 10;
  std::size_t hidden = 32;
  double sigma2 = 0.01;
  OutputActivation output = OutputActivation::kTanh;
};

/// Neural latent-variable model for 1-D density estimation:
///   x_i ~ N(0, I_L),  y_i | x_i ~ N(g_theta(x_i), sigma2),
/// where g_theta is an MLP L -> H -> H -> 1 with Leaky-ReLU (slope 0.01)
/// hidden layers. theta packs [W1, b1, W2, b2, W3, b3] (column-major weights).
/// Gradients are accumulated in reverse mode over the whole batch.
class TinyDecoderModel final : public LatentModel {
 public:
  static constexpr double kLeakySlope = 0.01;

  TinyDecoderModel(Vector y, TinyDecoderShape shape = {});

  std::size_t theta_dim() const override { return theta_dim_; }
  std::size_t latent_dim() const override {
    return shape_.latent_per_datum * static_cast<std::size_t>(y_.size());
  }
  std::string name() const override { return "tiny_decoder"; }

  bool factorizes() const override { return true; }
  std::size_t num_blocks() const override { return static_cast<std::size_t>(y_.size()); }
  std::size_t block_dim() const override { return shape_.latent_per_datum; }
  Vector block_grad_theta(const Vector& theta, std::size_t block,
                          std::span<const double> x_block) const override;
  Vector block_grad_x(const Vector& theta, std::size_t block,
                      std::span<const double> x_block) const override;

  const TinyDecoderShape& shape() const { return shape_; }
  const Vector& data() const { return y_; }

  /// Decoder mean g_theta(x) for each column of `latents` (L x n).
  Eigen::RowVectorXd decode(const Vector& theta, const Matrix& latents) const;

  /// Draws n observations from p_theta(y) using the given stream.
  Vector sample(const Vector& theta, std::size_t n, RngSpec rng) const;

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  Vector initial_theta(std::uint64_t seed) const;

 protected:
  double do_log_joint(const Vector& theta, const Vector& x) const override;
  Vector do_grad_theta(const Vector& theta, const Vector& x) const override;
  Vector do_grad_x(const Vector& theta, const Vector& x) const override;

 private:
  struct Evaluation {
    double log_joint = 0.0;
    Vector grad_theta;
    Matrix grad_x;  // L x n
  };
  Evaluation evaluate(const Vector& theta, const Eigen::Ref<const Matrix>& latents,
                      const Eigen::Ref<const Eigen::RowVectorXd>& y, bool want_theta,
                      bool want_x) const;

  Vector y_;
  TinyDecoderShape shape_;
  std::size_t theta_dim_;
};

}  // namespace mpd
