#include "mpd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mpd/toy_hm.hpp"

namespace mpd {

double RunRecord::metric(const std::string& name) const {
  for (const auto& [key, value] : metrics) {
    if (key == name) return value;
  }
  throw ContractViolation("run record has no metric named '" + name + "'");
}

double empirical_w1(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), "empirical_w1: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n == m) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::abs(a[i] - b[i]);
    return sum / static_cast<double>(n);
  }
  // Walk the merged breakpoints i/n and j/m of the two quantile functions.
  double total = 0.0;
  double level = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < n && j < m) {
    const double next_a = static_cast<double>(i + 1) / static_cast<double>(n);
    const double next_b = static_cast<double>(j + 1) / static_cast<double>(m);
    const double next = std::min(next_a, next_b);
    total += (next - level) * std::abs(a[i] - b[j]);
    level = next;
    // Compare in integers to advance both on exact ties.
    const auto lhs = (i + 1) * m;
    const auto rhs = (j + 1) * n;
    if (lhs <= rhs) ++i;
    if (rhs <= lhs) ++j;
  }
  return total;
}

double empirical_w1(const Vector& a, const Vector& b) {
  return empirical_w1(std::vector<double>(a.data(), a.data() + a.size()),
                      std::vector<double>(b.data(), b.data() + b.size()));
}

double abc(const std::vector<double>& baseline, const std::vector<double>& candidate,
           AbcWeights weights) {
  require(!baseline.empty(), "abc: empty curves");
  require(baseline.size() == candidate.size(), "abc: curves differ in length");
  const auto k_total = static_cast<double>(baseline.size());
  double norm = 2.0 / (k_total * (k_total + 1.0));
  if (weights == AbcWeights::kRaw) norm /= k_total * k_total;
  double sum = 0.0;
  for (std::size_t k = 0; k < baseline.size(); ++k) {
    sum += static_cast<double>(k + 1) * (baseline[k] - candidate[k]);
  }
  return norm * sum;
}

double param_error(const Vector& theta, const Vector& theta_star) {
  require(theta.size() == theta_star.size(), "param_error: dimension mismatch");
  return (theta - theta_star).norm();
}

double param_error(double theta, double theta_star) { return std::abs(theta - theta_star); }

double kl_normal(double mean_a, double var_a, double mean_b, double var_b) {
  require(var_a > 0.0 && var_b > 0.0, "kl_normal: variances must be positive");
  const double r = mean_a - mean_b;
  return 0.5 * (std::log(var_b / var_a) + (var_a + r * r) / var_b - 1.0);
}

double toyhm_free_energy(double theta, const Vector& q_mean, const Vector& q_var, const Vector& y,
                         double sigma2) {
  require(q_mean.size() == y.size() && q_var.size() == y.size(),
          "toyhm_free_energy: q and y differ in size");
  require((q_var.array() > 0.0).all(), "toyhm_free_energy: variances must be positive");
  const ToyHM model(y, sigma2);
  const auto post = toyhm_posterior(theta, y, sigma2);
  double kl = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    kl += kl_normal(q_mean[i], q_var[i], post.mean[i], post.variance);
  }
  return -model.log_marginal(theta) + kl;
}

double toyhm_free_energy(double theta, const Vector& q_mean, double q_var, const Vector& y,
                         double sigma2) {
  return toyhm_free_energy(theta, q_mean, Vector::Constant(y.size(), q_var), y, sigma2);
}

double momentum_free_energy(double theta, const Vector& m, const DiagonalGaussianMoments& q,
                            const MomentumParams& params, const Vector& y, double sigma2) {
  require(params.eta_x > 0.0, "momentum_free_energy: eta_x must be positive");
  require(q.u_mean.size() == q.x_mean.size() && q.u_var.size() == q.x_mean.size(),
          "momentum_free_energy: x and u moments differ in size");
  double kl_u = 0.0;
  for (Eigen::Index i = 0; i < q.u_mean.size(); ++i) {
    kl_u += kl_normal(q.u_mean[i], q.u_var[i], 0.0, 1.0 / params.eta_x);
  }
  return toyhm_free_energy(theta, q.x_mean, q.x_var, y, sigma2) + kl_u +
         0.5 * params.eta_theta * m.squaredNorm();
}

namespace {

double gaussian_entropy(const Matrix& cov) {
  const Eigen::LLT<Matrix> llt(cov);
  require(llt.info() == Eigen::Success, "covariance must be positive definite");
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const auto d = static_cast<double>(cov.rows());
  return 0.5 * (d * (1.0 + std::log(2.0 * std::numbers::pi)) + log_det);
}

}  // namespace

double gaussian_free_energy(const GaussianLinearModel& model, const Vector& theta,
                            const Vector& mean, const Matrix& cov) {
  return -model.expected_log_joint(theta, mean, cov) - gaussian_entropy(cov);
}

double gaussian_momentum_free_energy(const GaussianLinearModel& model, const Vector& theta,
                                     const Vector& m, const Vector& mean, const Matrix& cov,
                                     const MomentumParams& params) {
  const auto d = static_cast<Eigen::Index>(model.latent_dim());
  require(mean.size() == 2 * d && cov.rows() == 2 * d && cov.cols() == 2 * d,
          "gaussian_momentum_free_energy: moments must cover (x, u)");
  require(params.eta_x > 0.0, "gaussian_momentum_free_energy: eta_x must be positive");
  const auto mean_x = mean.head(d);
  const auto mean_u = mean.tail(d);
  const double kinetic =
      0.5 * params.eta_x * (mean_u.squaredNorm() + cov.bottomRightCorner(d, d).trace());
  const double u_normalizer = 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi / params.eta_x);
  return -model.expected_log_joint(theta, mean_x, cov.topLeftCorner(d, d)) - gaussian_entropy(cov) +
         kinetic + u_normalizer + 0.5 * params.eta_theta * m.squaredNorm();
}

}  // namespace mpd
