#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mpd/gaussian_linear.hpp"
#include "mpd/oracle.hpp"
#include "mpd/rng.hpp"
#include "mpd/tiny_decoder.hpp"
#include "mpd/toy_hm.hpp"

using namespace mpd;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

Vector randn(Eigen::Index n, std::uint32_t stream) {
  return gaussian_draw(RngSpec{99, stream, 0, RngDomain::kOracle}, n);
}

template <typename F>
Vector central_difference(F f, const Vector& at, double step = 1e-5) {
  Vector g(at.size());
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    Vector plus = at, minus = at;
    plus[i] += step;
    minus[i] -= step;
    g[i] = (f(plus) - f(minus)) / (2.0 * step);
  }
  return g;
}

double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

// Straightforward evaluation of the decoder density, one datum at a time.
double decoder_log_joint_reference(const Vector& theta, const Vector& x, const Vector& y,
                                   std::size_t latent, std::size_t hidden, double sigma2, bool use_tanh) {
  const auto l = static_cast<Eigen::Index>(latent);
  const auto h = static_cast<Eigen::Index>(hidden);
  auto leaky = [](double v) { return v > 0 ? v : 0.01 * v; };
  Eigen::Index offset = 0;
  auto take = [&](Eigen::Index n) {
    Vector out = theta.segment(offset, n);
    offset += n;
    return out;
  };
  const Vector w1 = take(h * l), b1 = take(h), w2 = take(h * h), b2 = take(h), w3 = take(h), b3 = take(1);
  double total = 0.0;
  for (Eigen::Index n = 0; n < y.size(); ++n) {
    std::vector<double> a(static_cast<std::size_t>(h)), c(static_cast<std::size_t>(h));
    for (Eigen::Index r = 0; r < h; ++r) {
      double s = b1[r];
      for (Eigen::Index k = 0; k < l; ++k) s += w1[r + k * h] * x[n * l + k];
      a[static_cast<std::size_t>(r)] = leaky(s);
    }
    for (Eigen::Index r = 0; r < h; ++r) {
      double s = b2[r];
      for (Eigen::Index k = 0; k < h; ++k) s += w2[r + k * h] * a[static_cast<std::size_t>(k)];
      c[static_cast<std::size_t>(r)] = leaky(s);
    }
    double out = b3[0];
    for (Eigen::Index k = 0; k < h; ++k) out += w3[k] * c[static_cast<std::size_t>(k)];
    if (use_tanh) out = std::tanh(out);
    total += -0.5 * std::log(2 * std::numbers::pi * sigma2) - 0.5 * (y[n] - out) * (y[n] - out) / sigma2;
    for (Eigen::Index k = 0; k < l; ++k) {
      total += -0.5 * std::log(2 * std::numbers::pi) - 0.5 * x[n * l + k] * x[n * l + k];
    }
  }
  return total;
}

}  // namespace

TEST(ToyHM, LogJointAllResidualsZero) {
  ToyHM model(vec({0, 0}), 1.0);
  EXPECT_NEAR(model.log_joint(vec({0}), vec({0, 0})), -2.0 * std::log(2 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(model.log_joint(vec({0}), vec({0, 0})), -3.6758, 1e-4);
}

TEST(ToyHM, LogJointSingleUnitResidual) {
  ToyHM model(vec({1}), 1.0);
  EXPECT_NEAR(model.log_joint(vec({0}), vec({0})), -std::log(2 * std::numbers::pi) - 0.5, 1e-12);
}

TEST(ToyHM, GradThetaExamples) {
  const Vector y = vec({1.5, -0.25, 4.0});
  ToyHM model(y, 1.0);
  EXPECT_NEAR(model.grad_theta(vec({y.mean()}), y)[0], 0.0, 1e-12);
  ToyHM two(vec({0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(two.grad_theta(vec({0}), vec({3, 1}))[0], 4.0);
}

TEST(ToyHM, GradXExamples) {
  const Vector y = vec({2.0, -1.0, 0.5});
  ToyHM model(y, 1.0);
  const double theta = 0.75;
  const Vector mode = (y.array() + theta) / 2.0;
  EXPECT_LT(model.grad_x(vec({theta}), mode).cwiseAbs().maxCoeff(), 1e-15);
  ToyHM one(vec({2}), 1.0);
  EXPECT_DOUBLE_EQ(one.grad_x(vec({0}), vec({0}))[0], 2.0);
}

TEST(ToyHM, GradientsMatchFiniteDifferences) {
  const Vector y = randn(7, 1) * 3.0;
  ToyHM model(y, 2.5);
  const Vector theta = vec({0.4});
  const Vector x = randn(7, 2);
  const Vector gt = central_difference([&](const Vector& t) { return model.log_joint(t, x); }, theta);
  const Vector gx = central_difference([&](const Vector& z) { return model.log_joint(theta, z); }, x);
  EXPECT_LT(relative_error(model.grad_theta(theta, x), gt), 1e-7);
  EXPECT_LT(relative_error(model.grad_x(theta, x), gx), 1e-7);
}

TEST(ToyHM, BlockGradientsSumToFullGradients) {
  const Vector y = randn(6, 3);
  ToyHM model(y, 0.7);
  const Vector theta = vec({-0.3});
  const Vector x = randn(6, 4);
  Vector sum = Vector::Zero(1);
  for (std::size_t b = 0; b < 6; ++b) {
    const std::span<const double> block(&x[static_cast<Eigen::Index>(b)], 1);
    sum += model.block_grad_theta(theta, b, block);
    EXPECT_NEAR(model.block_grad_x(theta, b, block)[0], model.grad_x(theta, x)[static_cast<Eigen::Index>(b)], 1e-14);
  }
  EXPECT_NEAR(sum[0], model.grad_theta(theta, x)[0], 1e-13);
}

TEST(ToyHM, DimensionMismatchThrows) {
  ToyHM model(vec({1, 2}), 1.0);
  EXPECT_THROW(model.log_joint(vec({0}), vec({1})), ContractViolation);
  EXPECT_THROW(model.grad_theta(vec({0, 1}), vec({1, 2})), ContractViolation);
  EXPECT_THROW(ToyHM(vec({1}), 0.0), ContractViolation);
}

TEST(ToyHM, MleIsSampleMean) {
  EXPECT_DOUBLE_EQ(toyhm_mle(Vector::Constant(5, 100.0)), 100.0);
  EXPECT_NEAR(toyhm_mle(center_to_mean(randn(50, 5) * 12.0, 10.0)), 10.0, 1e-12);
  EXPECT_THROW(toyhm_mle(Vector()), ContractViolation);
}

TEST(ToyHM, MleMatchesGoldenSectionMaximizer) {
  const Vector y = randn(40, 6) * 2.0 + Vector::Constant(40, 3.0);
  ToyHM model(y, 1.0);
  double a = -20, b = 20;
  const double r = (std::sqrt(5.0) - 1) / 2;
  for (int i = 0; i < 200; ++i) {
    const double c = b - r * (b - a), d = a + r * (b - a);
    if (model.log_marginal(c) > model.log_marginal(d)) b = d; else a = c;
  }
  EXPECT_NEAR(toyhm_mle(y), 0.5 * (a + b), 1e-6);
}

TEST(ToyHM, PosteriorIsConjugate) {
  const auto post = toyhm_posterior(2.0, vec({4.0, 0.0}), 1.0);
  EXPECT_DOUBLE_EQ(post.variance, 0.5);
  EXPECT_DOUBLE_EQ(post.mean[0], 3.0);
  EXPECT_DOUBLE_EQ(post.mean[1], 1.0);
  EXPECT_THROW(toyhm_posterior(0.0, vec({1.0}), -1.0), ContractViolation);
}

TEST(ToyHM, HessianSpectrumMatchesClosedForm) {
  for (std::size_t d : {1u, 2u, 5u, 10u}) {
    ToyHM model(Vector::Zero(static_cast<Eigen::Index>(d)), 1.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(dense_hessian(model));
    const double dd = static_cast<double>(d);
    std::vector<double> expected{(-(2 + dd) - std::sqrt(dd * dd + 4)) / 2,
                                 (-(2 + dd) + std::sqrt(dd * dd + 4)) / 2};
    for (std::size_t k = 1; k < d; ++k) expected.push_back(-2.0);
    std::sort(expected.begin(), expected.end());
    ASSERT_EQ(eig.eigenvalues().size(), static_cast<Eigen::Index>(expected.size()));
    for (std::size_t k = 0; k < expected.size(); ++k) {
      EXPECT_NEAR(eig.eigenvalues()[static_cast<Eigen::Index>(k)], expected[k], 1e-8) << "d_x = " << d;
    }
  }
}

TEST(ToyHM, LipschitzIsSpectralRadius) {
  for (std::size_t d : {1u, 2u, 5u, 10u, 100u}) {
    ToyHM model(Vector::Zero(static_cast<Eigen::Index>(d)), 1.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(dense_hessian(model));
    EXPECT_NEAR(toyhm_lipschitz(d), eig.eigenvalues().cwiseAbs().maxCoeff(), 1e-8);
  }
  EXPECT_NEAR(toyhm_lipschitz(1), (3 + std::sqrt(5.0)) / 2, 1e-15);
}

TEST(ToyHM, HessianIsNegativeDefiniteButNotBoundedByMinusTwo) {
  // Largest eigenvalue is (-(2+d) + sqrt(d^2+4))/2, which lies above -2.
  for (std::size_t d : {1u, 10u, 100u}) {
    ToyHM model(Vector::Zero(static_cast<Eigen::Index>(d)), 1.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(dense_hessian(model));
    const double top = eig.eigenvalues().maxCoeff();
    EXPECT_LT(top, 0.0);
    EXPECT_GT(top, -2.0);
  }
}

TEST(ToyHM, GenerateIsDeterministicAndCentered) {
  const Vector a = toyhm_generate(1000, 100.0, 1.0, 3);
  EXPECT_EQ(a, toyhm_generate(1000, 100.0, 1.0, 3));
  EXPECT_NE(a, toyhm_generate(1000, 100.0, 1.0, 4));
  // y ~ N(theta, sigma^2 + 1).
  EXPECT_NEAR(a.mean(), 100.0, 5 * std::sqrt(2.0 / 1000));
}

TEST(GaussianLinear, ReproducesToyHMExactly) {
  const Vector y = randn(5, 7) + Vector::Constant(5, 2.0);
  ToyHM toy(y, 1.7);
  const auto quad = GaussianLinearModel::from_toyhm(toy);
  for (std::uint32_t s = 0; s < 5; ++s) {
    const Vector theta = randn(1, 10 + s);
    const Vector x = randn(5, 20 + s);
    EXPECT_NEAR(quad.log_joint(theta, x), toy.log_joint(theta, x), 1e-10);
    EXPECT_LT((quad.grad_theta(theta, x) - toy.grad_theta(theta, x)).norm(), 1e-12);
    EXPECT_LT((quad.grad_x(theta, x) - toy.grad_x(theta, x)).norm(), 1e-12);
    EXPECT_NEAR(quad.log_marginal(theta), toy.log_marginal(theta[0]), 1e-9);
  }
  EXPECT_NEAR(quad.mle()[0], y.mean(), 1e-12);
  const auto post = toyhm_posterior(0.3, y, 1.7);
  EXPECT_LT((quad.posterior_mean(vec({0.3})) - post.mean).norm(), 1e-12);
  EXPECT_NEAR(quad.posterior_cov()(0, 0), post.variance, 1e-14);
}

TEST(GaussianLinear, LogMarginalMatchesQuadrature) {
  Matrix p(2, 2);
  p << 2.0, -0.5, -0.5, 1.5;
  GaussianLinearModel model(1, p, vec({0.3, -0.2}), 0.1);
  const Vector theta = vec({0.7});
  double integral = 0.0;
  const double dx = 1e-3;
  for (double x = -15; x <= 15; x += dx) integral += std::exp(model.log_joint(theta, vec({x}))) * dx;
  EXPECT_NEAR(model.log_marginal(theta), std::log(integral), 1e-8);
}

TEST(GaussianLinear, RejectsBadPrecision) {
  Matrix asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(GaussianLinearModel(1, asym, Vector::Zero(2), 0), ContractViolation);
  Matrix singular = Matrix::Zero(2, 2);
  EXPECT_THROW(GaussianLinearModel(1, singular, Vector::Zero(2), 0), ContractViolation);
}

TEST(TinyDecoder, LogJointMatchesReference) {
  for (bool use_tanh : {false, true}) {
    const TinyDecoderShape shape{3, 5, 0.04, use_tanh ? OutputActivation::kTanh : OutputActivation::kIdentity};
    const Vector y = randn(4, 30);
    TinyDecoderModel model(y, shape);
    const Vector theta = randn(static_cast<Eigen::Index>(model.theta_dim()), 31);
    const Vector x = randn(static_cast<Eigen::Index>(model.latent_dim()), 32);
    EXPECT_NEAR(model.log_joint(theta, x),
                decoder_log_joint_reference(theta, x, y, 3, 5, 0.04, use_tanh), 1e-9);
  }
}

TEST(TinyDecoder, GradientsMatchFiniteDifferences) {
  const TinyDecoderShape shape{10, 8, 0.01, OutputActivation::kTanh};
  TinyDecoderModel model(randn(3, 40), shape);
  for (std::uint32_t s = 0; s < 3; ++s) {
    const Vector theta = 0.5 * randn(static_cast<Eigen::Index>(model.theta_dim()), 41 + s);
    const Vector x = randn(static_cast<Eigen::Index>(model.latent_dim()), 51 + s);
    const Vector gt = central_difference([&](const Vector& t) { return model.log_joint(t, x); }, theta);
    const Vector gx = central_difference([&](const Vector& z) { return model.log_joint(theta, z); }, x);
    EXPECT_LT(relative_error(model.grad_theta(theta, x), gt), 1e-4);
    EXPECT_LT(relative_error(model.grad_x(theta, x), gx), 1e-4);
  }
}

TEST(TinyDecoder, BlockGradientsSumToFullGradients) {
  const TinyDecoderShape shape{2, 4, 0.1, OutputActivation::kIdentity};
  TinyDecoderModel model(randn(5, 60), shape);
  const Vector theta = randn(static_cast<Eigen::Index>(model.theta_dim()), 61);
  const Vector x = randn(10, 62);
  const Vector full_t = model.grad_theta(theta, x);
  const Vector full_x = model.grad_x(theta, x);
  Vector sum = Vector::Zero(full_t.size());
  for (std::size_t b = 0; b < 5; ++b) {
    const std::span<const double> block(&x[static_cast<Eigen::Index>(2 * b)], 2);
    sum += model.block_grad_theta(theta, b, block);
    EXPECT_LT((model.block_grad_x(theta, b, block) - full_x.segment(static_cast<Eigen::Index>(2 * b), 2)).norm(), 1e-10);
  }
  EXPECT_LT((sum - full_t).norm(), 1e-9 * (1 + full_t.norm()));
}

TEST(TinyDecoder, ShapeAndInitializer) {
  TinyDecoderModel model(Vector::Zero(3), TinyDecoderShape{});
  EXPECT_EQ(model.shape().hidden, 32u);
  EXPECT_EQ(model.shape().output, OutputActivation::kTanh);
  EXPECT_EQ(model.theta_dim(), 32u * 10 + 32 + 32 * 32 + 32 + 32 + 1);
  EXPECT_EQ(model.latent_dim(), 30u);
  const Vector t = model.initial_theta(1);
  EXPECT_EQ(t, model.initial_theta(1));
  EXPECT_LE(t.head(320).cwiseAbs().maxCoeff(), 1.0 / std::sqrt(10.0));
  EXPECT_THROW(TinyDecoderModel(Vector(), TinyDecoderShape{}), ContractViolation);
}

TEST(LatentModel, NonFactorizedModelRejectsBlockGradients) {
  Matrix p = Matrix::Identity(2, 2);
  GaussianLinearModel model(1, p, Vector::Zero(2), 0.0);
  const double x = 0.0;
  EXPECT_FALSE(model.factorizes());
  EXPECT_THROW(model.block_grad_x(vec({0}), 0, std::span<const double>(&x, 1)), ContractViolation);
}
