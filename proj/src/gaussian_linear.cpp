#include "mpd/gaussian_linear.hpp"

#include <cmath>
#include <numbers>

#include "mpd/toy_hm.hpp"

namespace mpd {

namespace {
const double kLog2Pi = std::log(2.0 * std::numbers::pi);
}

GaussianLinearModel::GaussianLinearModel(std::size_t theta_dim, Matrix precision, Vector linear,
                                         double constant)
    : d_theta_(theta_dim), p_(std::move(precision)), b_(std::move(linear)), c_(constant) {
  require(p_.rows() == p_.cols() && p_.rows() == b_.size(),
          "gaussian_linear: precision must be square and match the linear term");
  require(static_cast<Eigen::Index>(d_theta_) < b_.size(),
          "gaussian_linear: latent dimension must be positive");
  require((p_ - p_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + p_.cwiseAbs().maxCoeff()),
          "gaussian_linear: precision must be symmetric");
  Eigen::LLT<Matrix> llt(p_xx());
  require(llt.info() == Eigen::Success, "gaussian_linear: P_xx must be positive definite");
}

GaussianLinearModel GaussianLinearModel::from_toyhm(const ToyHM& model) {
  const Vector& y = model.data();
  const Eigen::Index n = y.size();
  const double s2 = model.sigma2();
  Matrix p = Matrix::Zero(n + 1, n + 1);
  p(0, 0) = static_cast<double>(n) / s2;
  p.block(0, 1, 1, n).setConstant(-1.0 / s2);
  p.block(1, 0, n, 1).setConstant(-1.0 / s2);
  p.bottomRightCorner(n, n).diagonal().setConstant(1.0 + 1.0 / s2);
  Vector b = Vector::Zero(n + 1);
  b.tail(n) = y;
  const double c = -0.5 * y.squaredNorm() - static_cast<double>(n) * kLog2Pi -
                   0.5 * static_cast<double>(n) * std::log(s2);
  return GaussianLinearModel(1, std::move(p), std::move(b), c);
}

double GaussianLinearModel::do_log_joint(const Vector& theta, const Vector& x) const {
  Vector z(b_.size());
  z << theta, x;
  return -0.5 * z.dot(p_ * z) + b_.dot(z) + c_;
}

Vector GaussianLinearModel::do_grad_theta(const Vector& theta, const Vector& x) const {
  return b_t() - p_tt() * theta - p_tx() * x;
}

Vector GaussianLinearModel::do_grad_x(const Vector& theta, const Vector& x) const {
  return b_x() - p_xt() * theta - p_xx() * x;
}

Vector GaussianLinearModel::posterior_mean(const Vector& theta) const {
  require(static_cast<std::size_t>(theta.size()) == d_theta_, "gaussian_linear: theta size");
  return p_xx().llt().solve(b_x() - p_xt() * theta);
}

Matrix GaussianLinearModel::posterior_cov() const {
  const auto n = static_cast<Eigen::Index>(latent_dim());
  return p_xx().llt().solve(Matrix::Identity(n, n));
}

double GaussianLinearModel::log_marginal(const Vector& theta) const {
  require(static_cast<std::size_t>(theta.size()) == d_theta_, "gaussian_linear: theta size");
  Eigen::LLT<Matrix> llt(p_xx());
  const Vector v = b_x() - p_xt() * theta;
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double n = static_cast<double>(latent_dim());
  return c_ + b_t().dot(theta) - 0.5 * theta.dot(p_tt() * theta) + 0.5 * v.dot(llt.solve(v)) +
         0.5 * n * kLog2Pi - 0.5 * logdet;
}

Vector GaussianLinearModel::mle() const {
  Eigen::LLT<Matrix> llt(p_xx());
  const Matrix schur = p_tt() - p_tx() * llt.solve(p_xt());
  Eigen::LLT<Matrix> schur_llt(schur);
  require(schur_llt.info() == Eigen::Success,
          "gaussian_linear: marginal likelihood has no unique maximizer");
  return schur_llt.solve(b_t() - p_tx() * llt.solve(b_x()));
}

double GaussianLinearModel::expected_log_joint(const Vector& theta, const Vector& mean,
                                               const Matrix& cov) const {
  // E[-1/2 x^T P_xx x] = -1/2 (mean^T P_xx mean + tr(P_xx cov)).
  return log_joint(theta, mean) - 0.5 * (p_xx() * cov).trace();
}

}  // namespace mpd
