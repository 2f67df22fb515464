#include "mpd/tiny_decoder.hpp"

#include <cmath>
#include <numbers>

namespace mpd {

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using ConstVecMap = Eigen::Map<const Vector>;

struct Layers {
  ConstMap w1;
  ConstVecMap b1;
  ConstMap w2;
  ConstVecMap b2;
  ConstMap w3;
  double b3;
};

Layers unpack(const Vector& theta, Eigen::Index latent, Eigen::Index hidden) {
  const double* p = theta.data();
  ConstMap w1(p, hidden, latent);
  p += hidden * latent;
  ConstVecMap b1(p, hidden);
  p += hidden;
  ConstMap w2(p, hidden, hidden);
  p += hidden * hidden;
  ConstVecMap b2(p, hidden);
  p += hidden;
  ConstMap w3(p, 1, hidden);
  p += hidden;
  return Layers{w1, b1, w2, b2, w3, *p};
}

Matrix leaky(const Matrix& a) {
  return a.unaryExpr([](double v) { return v > 0.0 ? v : TinyDecoderModel::kLeakySlope * v; });
}

Matrix leaky_slope(const Matrix& a) {
  return a.unaryExpr([](double v) { return v > 0.0 ? 1.0 : TinyDecoderModel::kLeakySlope; });
}

}  // namespace

TinyDecoderModel::TinyDecoderModel(Vector y, TinyDecoderShape shape)
    : y_(std::move(y)), shape_(shape) {
  require(y_.size() > 0, "tiny_decoder: dataset must be non-empty");
  require(shape_.latent_per_datum >= 1 && shape_.hidden >= 1, "tiny_decoder: empty layer");
  require(shape_.sigma2 > 0.0, "tiny_decoder: sigma2 must be positive");
  const std::size_t l = shape_.latent_per_datum;
  const std::size_t h = shape_.hidden;
  theta_dim_ = h * l + h + h * h + h + h + 1;
}

TinyDecoderModel::Evaluation TinyDecoderModel::evaluate(
    const Vector& theta, const Eigen::Ref<const Matrix>& latents,
    const Eigen::Ref<const Eigen::RowVectorXd>& y, bool want_theta, bool want_x) const {
  const auto l = static_cast<Eigen::Index>(shape_.latent_per_datum);
  const auto h = static_cast<Eigen::Index>(shape_.hidden);
  const Layers net = unpack(theta, l, h);
  const Eigen::Index n = latents.cols();

  const Matrix a1 = (net.w1 * latents).colwise() + net.b1;
  const Matrix h1 = leaky(a1);
  const Matrix a2 = (net.w2 * h1).colwise() + net.b2;
  const Matrix h2 = leaky(a2);
  const Eigen::RowVectorXd a3 = (net.w3 * h2).array() + net.b3;
  const bool use_tanh = shape_.output == OutputActivation::kTanh;
  const Eigen::RowVectorXd out = use_tanh ? Eigen::RowVectorXd(a3.array().tanh()) : a3;

  const double log_2pi = std::log(2.0 * std::numbers::pi);
  const Eigen::RowVectorXd resid = y - out;
  Evaluation ev;
  ev.log_joint = -0.5 * resid.squaredNorm() / shape_.sigma2 -
                 0.5 * static_cast<double>(n) * (log_2pi + std::log(shape_.sigma2)) -
                 0.5 * latents.squaredNorm() - 0.5 * static_cast<double>(n * l) * log_2pi;
  if (!want_theta && !want_x) return ev;

  // Reverse sweep.
  Eigen::RowVectorXd d_a3 = resid / shape_.sigma2;
  if (use_tanh) d_a3.array() *= 1.0 - out.array().square();
  const Matrix d_a2 = (net.w3.transpose() * d_a3).cwiseProduct(leaky_slope(a2));
  const Matrix d_a1 = (net.w2.transpose() * d_a2).cwiseProduct(leaky_slope(a1));

  if (want_theta) {
    ev.grad_theta.resize(static_cast<Eigen::Index>(theta_dim_));
    double* p = ev.grad_theta.data();
    Eigen::Map<Matrix>(p, h, l) = d_a1 * latents.transpose();
    p += h * l;
    Eigen::Map<Vector>(p, h) = d_a1.rowwise().sum();
    p += h;
    Eigen::Map<Matrix>(p, h, h) = d_a2 * h1.transpose();
    p += h * h;
    Eigen::Map<Vector>(p, h) = d_a2.rowwise().sum();
    p += h;
    Eigen::Map<Matrix>(p, 1, h) = d_a3 * h2.transpose();
    p += h;
    *p = d_a3.sum();
  }
  if (want_x) ev.grad_x = net.w1.transpose() * d_a1 - latents;
  return ev;
}

double TinyDecoderModel::do_log_joint(const Vector& theta, const Vector& x) const {
  const auto l = static_cast<Eigen::Index>(shape_.latent_per_datum);
  const Eigen::Map<const Matrix> latents(x.data(), l, y_.size());
  return evaluate(theta, latents, y_.transpose(), false, false).log_joint;
}

Vector TinyDecoderModel::do_grad_theta(const Vector& theta, const Vector& x) const {
  const auto l = static_cast<Eigen::Index>(shape_.latent_per_datum);
  const Eigen::Map<const Matrix> latents(x.data(), l, y_.size());
  return evaluate(theta, latents, y_.transpose(), true, false).grad_theta;
}

Vector TinyDecoderModel::do_grad_x(const Vector& theta, const Vector& x) const {
  const auto l = static_cast<Eigen::Index>(shape_.latent_per_datum);
  const Eigen::Map<const Matrix> latents(x.data(), l, y_.size());
  const Matrix g = evaluate(theta, latents, y_.transpose(), false, true).grad_x;
  return Eigen::Map<const Vector>(g.data(), g.size());
}

Vector TinyDecoderModel::block_grad_theta(const Vector& theta, std::size_t block,
                                          std::span<const double> x_block) const {
  require(block < num_blocks() && x_block.size() == block_dim(), "tiny_decoder: bad block");
  const auto l = static_cast<Eigen::Index>(shape_.latent_per_datum);
  const Eigen::Map<const Matrix> latents(x_block.data(), l, 1);
  const Eigen::RowVectorXd y = y_.segment(static_cast<Eigen::Index>(block), 1).transpose();
  return evaluate(theta, latents, y, true, false).grad_theta;
}

Vector TinyDecoderModel::block_grad_x(const Vector& theta, std::size_t block,
                                      std::span<const double> x_block) const {
  require(block < num_blocks() && x_block.size() == block_dim(), "tiny_decoder: bad block");
  const auto l = static_cast<Eigen::Index>(shape_.latent_per_datum);
  const Eigen::Map<const Matrix> latents(x_block.data(), l, 1);
  const Eigen::RowVectorXd y = y_.segment(static_cast<Eigen::Index>(block), 1).transpose();
  return evaluate(theta, latents, y, false, true).grad_x;
}

Eigen::RowVectorXd TinyDecoderModel::decode(const Vector& theta, const Matrix& latents) const {
  require(static_cast<std::size_t>(theta.size()) == theta_dim_ &&
              static_cast<std::size_t>(latents.rows()) == shape_.latent_per_datum,
          "tiny_decoder: decode dimension mismatch");
  const auto l = static_cast<Eigen::Index>(shape_.latent_per_datum);
  const auto h = static_cast<Eigen::Index>(shape_.hidden);
  const Layers net = unpack(theta, l, h);
  const Matrix h1 = leaky((net.w1 * latents).colwise() + net.b1);
  const Matrix h2 = leaky((net.w2 * h1).colwise() + net.b2);
  Eigen::RowVectorXd a3 = (net.w3 * h2).array() + net.b3;
  if (shape_.output == OutputActivation::kTanh) a3 = a3.array().tanh();
  return a3;
}

Vector TinyDecoderModel::sample(const Vector& theta, std::size_t n, RngSpec rng) const {
  NormalStream normals(rng);
  const auto l = static_cast<Eigen::Index>(shape_.latent_per_datum);
  Matrix latents(l, static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < latents.cols(); ++j) normals.fill(latents.col(j));
  Vector out = decode(theta, latents).transpose();
  const double sd = std::sqrt(shape_.sigma2);
  for (auto& v : out) v += sd * normals.next();
  return out;
}

Vector TinyDecoderModel::initial_theta(std::uint64_t seed) const {
  const auto l = static_cast<double>(shape_.latent_per_datum);
  const auto h = static_cast<double>(shape_.hidden);
  const auto hl = static_cast<Eigen::Index>(shape_.hidden * shape_.latent_per_datum);
  const auto hi = static_cast<Eigen::Index>(shape_.hidden);
  NormalStream uniforms(RngSpec{seed, 0, 0, RngDomain::kTheta});
  Vector theta(static_cast<Eigen::Index>(theta_dim_));
  Eigen::Index k = 0;
  auto fill = [&](Eigen::Index count, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index i = 0; i < count; ++i) theta[k++] = bound * (2.0 * uniforms.next_uniform() - 1.0);
  };
  fill(hl + hi, l);
  fill(hi * hi + hi, h);
  fill(hi + 1, h);
  return theta;
}

}  // namespace mpd
