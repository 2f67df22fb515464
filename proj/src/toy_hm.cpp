#include "mpd/toy_hm.hpp"

#include <cmath>

#include "mpd/rng.hpp"

namespace mpd {

ToyHM::ToyHM(Vector y, double sigma2) : y_(std::move(y)), sigma2_(sigma2) {
  require(y_.size() > 0, "toyhm: dataset must be non-empty");
  require(sigma2_ > 0.0 && std::isfinite(sigma2_), "toyhm: sigma2 must be positive");
}

double ToyHM::do_log_joint(const Vector& theta, const Vector& x) const {
  double total = 0.0;
  for (Eigen::Index i = 0; i < y_.size(); ++i) {
    total += log_normal_pdf(y_[i], x[i], 1.0) + log_normal_pdf(x[i], theta[0], sigma2_);
  }
  return total;
}

Vector ToyHM::do_grad_theta(const Vector& theta, const Vector& x) const {
  Vector g(1);
  g[0] = (x.array() - theta[0]).sum() / sigma2_;
  return g;
}

Vector ToyHM::do_grad_x(const Vector& theta, const Vector& x) const {
  return (y_ - x) + (theta[0] - x.array()).matrix() / sigma2_;
}

Vector ToyHM::block_grad_theta(const Vector& theta, std::size_t,
                               std::span<const double> x_block) const {
  Vector g(1);
  g[0] = (x_block[0] - theta[0]) / sigma2_;
  return g;
}

Vector ToyHM::block_grad_x(const Vector& theta, std::size_t block,
                           std::span<const double> x_block) const {
  const double x = x_block[0];
  Vector g(1);
  g[0] = (y_[static_cast<Eigen::Index>(block)] - x) + (theta[0] - x) / sigma2_;
  return g;
}

double ToyHM::log_marginal(double theta) const {
  double total = 0.0;
  for (Eigen::Index i = 0; i < y_.size(); ++i) total += log_normal_pdf(y_[i], theta, 1.0 + sigma2_);
  return total;
}

double toyhm_mle(const Vector& y) {
  require(y.size() > 0, "toyhm_mle: dataset must be non-empty");
  return y.mean();
}

ToyHMPosterior toyhm_posterior(double theta, const Vector& y, double sigma2) {
  require(sigma2 > 0.0, "toyhm_posterior: sigma2 must be positive");
  const double precision = 1.0 + 1.0 / sigma2;
  ToyHMPosterior post;
  post.variance = 1.0 / precision;
  post.mean = (y.array() + theta / sigma2) / precision;
  return post;
}

double toyhm_lipschitz(std::size_t latent_dim) {
  require(latent_dim >= 1, "toyhm_lipschitz: d_x must be at least 1");
  const double d = static_cast<double>(latent_dim);
  return ((2.0 + d) + std::sqrt(d * d + 4.0)) / 2.0;
}

Vector toyhm_generate(std::size_t n, double theta, double sigma, std::uint64_t seed) {
  require(n >= 1, "toyhm_generate: n must be at least 1");
  NormalStream normals(RngSpec{seed, 0, 0, RngDomain::kData});
  Vector y(static_cast<Eigen::Index>(n));
  for (auto& yi : y) {
    const double xi = theta + sigma * normals.next();
    yi = xi + normals.next();
  }
  return y;
}

Vector center_to_mean(const Vector& y, double target) {
  require(y.size() > 0, "center_to_mean: empty data");
  return (y.array() - y.mean() + target).matrix();
}

}  // namespace mpd
