#include "mpd/validate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <json.hpp>
#include <sstream>

#include "mpd/diagnostics.hpp"
#include "mpd/gaussian_linear.hpp"
#include "mpd/integrators.hpp"
#include "mpd/oracle.hpp"
#include "mpd/rng.hpp"
#include "mpd/tiny_decoder.hpp"
#include "mpd/toy_hm.hpp"

namespace mpd {

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

std::string ValidationReport::to_json() const {
  nlohmann::json j;
  j["passed"] = passed();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    j["checks"].push_back({{"name", c.name},
                           {"passed", c.passed},
                           {"observed", std::isfinite(c.observed) ? nlohmann::json(c.observed) : nlohmann::json(nullptr)},
                           {"expected", c.expected},
                           {"detail", c.detail}});
  }
  return j.dump(2);
}

double cholesky_reconstruction_error(const TransitionCoefficients<double>& c, double gamma,
                                     double eta, double h) {
  using ld = long double;
  const ld g = gamma;
  const ld e = eta;
  const ld omega = std::exp(-g * e * static_cast<ld>(h));
  const ld xx = (2 * static_cast<ld>(h) + (4 * omega - omega * omega - 3) / (g * e)) / g;
  const ld ux = (1 - omega) * (1 - omega) / (g * e);
  const ld uu = (1 - omega * omega) / e;
  const auto rec = c.covariance();
  const ld dxx = rec.xx - xx;
  const ld dux = rec.ux - ux;
  const ld duu = rec.uu - uu;
  const ld num = std::sqrt(dxx * dxx + 2 * dux * dux + duu * duu);
  const ld den = std::sqrt(xx * xx + 2 * ux * ux + uu * uu);
  return static_cast<double>(num / den);
}

double linear_fit_r2(const std::vector<double>& t, const std::vector<double>& v) {
  require(t.size() == v.size() && t.size() >= 3, "linear_fit_r2: need at least three points");
  const auto n = static_cast<double>(t.size());
  double mt = 0.0;
  double mv = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i] / n;
    mv += v[i] / n;
  }
  double stt = 0.0;
  double svv = 0.0;
  double stv = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    stt += (t[i] - mt) * (t[i] - mt);
    svv += (v[i] - mv) * (v[i] - mv);
    stv += (t[i] - mt) * (v[i] - mv);
  }
  if (svv == 0.0) return 1.0;
  return stv * stv / (stt * svv);
}

namespace {

using Check = std::function<CheckResult(const ValidateOptions&)>;

CheckResult make(std::string name, double observed, double bound, std::string detail,
                 bool lower_is_better = true) {
  const bool ok = std::isfinite(observed) && (lower_is_better ? observed <= bound : observed >= bound);
  return {std::move(name), ok, observed, bound, std::move(detail)};
}

TransitionCoefficients<double> coefficients(double gamma, double eta, double h, const ValidateOptions& o) {
  auto c = transition_coefficients(gamma, eta, h);
  c.L_uu *= o.l_uu_scale;
  return c;
}

// Deterministic pseudo-random inputs for the checks.
class Inputs {
 public:
  explicit Inputs(std::uint32_t stream) : normals_(RngSpec{0x5eed, stream, 0, RngDomain::kOracle}) {}
  double normal() { return normals_.next(); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * normals_.next_uniform(); }
  Vector normals(Eigen::Index n) { return normals_.draw(n); }

 private:
  NormalStream normals_;
};

CheckResult rng_moments(const ValidateOptions&) {
  const Vector z = gaussian_draw(RngSpec{2024, 7, 0, RngDomain::kOracle}, 1000000);
  const double mean = z.mean();
  const double var = (z.array() - mean).square().sum() / static_cast<double>(z.size() - 1);
  const double worst = std::max(std::abs(mean) / 0.004, std::abs(var - 1.0) / 0.006);
  std::ostringstream d;
  d << "mean " << mean << ", variance " << var << " over 1e6 draws; observed is the worst ratio to its bound";
  return make("rng_moments", worst, 1.0, d.str());
}

double fd_error(const LatentModel& model, const Vector& theta, const Vector& x) {
  constexpr double kStep = 1e-5;
  const Vector gt = model.grad_theta(theta, x);
  const Vector gx = model.grad_x(theta, x);
  Vector ft(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Vector tp = theta;
    Vector tm = theta;
    tp[i] += kStep;
    tm[i] -= kStep;
    ft[i] = (model.log_joint(tp, x) - model.log_joint(tm, x)) / (2 * kStep);
  }
  Vector fx(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x;
    Vector xm = x;
    xp[i] += kStep;
    xm[i] -= kStep;
    fx[i] = (model.log_joint(theta, xp) - model.log_joint(theta, xm)) / (2 * kStep);
  }
  return std::max((gt - ft).norm() / (1.0 + gt.norm()), (gx - fx).norm() / (1.0 + gx.norm()));
}

CheckResult model_gradients(const ValidateOptions&) {
  Inputs in(1);
  double worst = 0.0;
  const ToyHM toy(in.normals(6) * 3.0, 1.7);
  for (int k = 0; k < 20; ++k) worst = std::max(worst, fd_error(toy, in.normals(1) * 2.0, in.normals(6) * 2.0));
  const auto linear = GaussianLinearModel::from_toyhm(ToyHM(in.normals(4), 0.8));
  for (int k = 0; k < 20; ++k) worst = std::max(worst, fd_error(linear, in.normals(1), in.normals(4)));
  const TinyDecoderModel decoder(in.normals(4), TinyDecoderShape{3, 8, 0.01, OutputActivation::kIdentity});
  for (int k = 0; k < 20; ++k) {
    const Vector theta = decoder.initial_theta(static_cast<std::uint64_t>(k));
    worst = std::max(worst, fd_error(decoder, theta, in.normals(static_cast<Eigen::Index>(decoder.latent_dim()))));
  }
  return make("model_gradients", worst, 1e-4,
              "worst relative central-difference error over ToyHM, Gaussian-linear and decoder models");
}

Eigen::VectorXd sorted_eigenvalues(const Matrix& a) {
  Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Matrix>(a).eigenvalues();
  std::sort(ev.data(), ev.data() + ev.size());
  return ev;
}

CheckResult toyhm_spectrum(const ValidateOptions&) {
  double worst = 0.0;
  for (const Eigen::Index d : {1, 2, 5, 10}) {
    const ToyHM model(Vector::Zero(d), 1.0);
    const Vector ev = sorted_eigenvalues(dense_hessian(model));
    const double dd = static_cast<double>(d);
    const double disc = std::sqrt(dd * dd + 4.0);
    std::vector<double> expected{(-(2 + dd) - disc) / 2, (-(2 + dd) + disc) / 2};
    for (Eigen::Index i = 1; i < d; ++i) expected.push_back(-2.0);
    std::sort(expected.begin(), expected.end());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      worst = std::max(worst, std::abs(ev[i] - expected[static_cast<std::size_t>(i)]));
    }
  }
  return make("toyhm_hessian_spectrum", worst, 1e-8,
              "max |eigenvalue - closed form| for d_x in {1, 2, 5, 10}");
}

CheckResult toyhm_lipschitz_check(const ValidateOptions&) {
  double worst = 0.0;
  for (const std::size_t d : {1, 2, 5, 10, 100}) {
    const ToyHM model(Vector::Zero(static_cast<Eigen::Index>(d)), 1.0);
    const Vector ev = sorted_eigenvalues(dense_hessian(model));
    const double radius = std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));
    worst = std::max(worst, std::abs(radius - toyhm_lipschitz(d)));
  }
  return make("toyhm_lipschitz", worst, 1e-8, "|spectral radius - K_hm| for d_x in {1, 2, 5, 10, 100}");
}

CheckResult toyhm_concavity(const ValidateOptions&) {
  double worst = -1e300;
  for (const Eigen::Index d : {1, 2, 5, 10, 100}) {
    const ToyHM model(Vector::Zero(d), 1.0);
    worst = std::max(worst, sorted_eigenvalues(dense_hessian(model)).maxCoeff());
  }
  return make("toyhm_negative_definite", worst, 0.0,
              "largest Hessian eigenvalue at sigma2 = 1; it lies between -1 and 0 for every d_x, "
              "so the bound is strict negativity");
}

CheckResult toyhm_mle_check(const ValidateOptions&) {
  Inputs in(2);
  const Vector y = in.normals(25) * 2.0 + Vector::Constant(25, 3.0);
  const ToyHM model(y, 1.3);
  // Golden-section search on the closed-form marginal.
  double a = y.minCoeff();
  double b = y.maxCoeff();
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int k = 0; k < 200 && b - a > 1e-13; ++k) {
    const double c = b - phi * (b - a);
    const double d = a + phi * (b - a);
    if (model.log_marginal(c) > model.log_marginal(d)) {
      b = d;
    } else {
      a = c;
    }
  }
  return make("toyhm_mle", std::abs(0.5 * (a + b) - toyhm_mle(y)), 1e-6,
              "golden-section maximizer of log p_theta(y) vs the sample mean");
}

std::vector<std::array<double, 3>> cholesky_grid() {
  std::vector<std::array<double, 3>> grid;
  for (double g : {0.1, 1.0, 10.0}) {
    for (double e : {0.1, 1.0, 10.0}) {
      for (double h : {0.1, 1.0, 10.0}) {
        for (double s : {1e-3, 1e-1}) grid.push_back({g, e, h * s});
      }
    }
  }
  return grid;
}

CheckResult transition_cholesky(const ValidateOptions& o) {
  double worst = 0.0;
  for (const auto& [g, e, h] : cholesky_grid()) {
    worst = std::max(worst, cholesky_reconstruction_error(coefficients(g, e, h, o), g, e, h));
  }
  return make("transition_cholesky", worst, 1e-10,
              "max ||L L^T - Sigma|| / ||Sigma|| over 54 (gamma, eta, h) points");
}

CheckResult series_crossover(const ValidateOptions&) {
  const double a = kSeriesThreshold;
  const double drift_closed = a + std::expm1(-a);
  const double var_closed = 2 * a + 4 * std::expm1(-a) - std::expm1(-2 * a);
  const double worst = std::max(std::abs(detail::drift_kernel_series(a) - drift_closed) / drift_closed,
                                std::abs(detail::position_variance_series(a) - var_closed) / var_closed);
  return make("transition_series_crossover", worst, 1e-12,
              "relative gap between the series and closed forms at the crossover");
}

const std::vector<std::array<double, 3>>& monte_carlo_grid() {
  static const std::vector<std::array<double, 3>> grid{
      {0.5, 1.0, 0.1},   {1.0, 1.0, 0.5},        {2.0, 1.0, 1.0},      {0.1, 10.0, 0.1},
      {1.0, 10.0, 0.05}, {0.7, 403.96, 1e-2},    {0.1, 403.96, 1e-2},  {1.0, 403.96, 1e-4},
      {0.293, 403.96, 1e-3}, {0.4, 100.0, 1e-3}, {5.0, 2.0, 0.3},      {0.5, 4.0, 2.0}};
  return grid;
}

struct Sample2 {
  double mean_x, mean_u, var_x, var_u, cov_xu;
  std::size_t n;
};

Sample2 moments(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& u) {
  const auto n = static_cast<double>(x.size());
  Sample2 s{x.mean(), u.mean(), 0, 0, 0, static_cast<std::size_t>(x.size())};
  s.var_x = (x.array() - s.mean_x).square().sum() / (n - 1);
  s.var_u = (u.array() - s.mean_u).square().sum() / (n - 1);
  s.cov_xu = ((x.array() - s.mean_x) * (u.array() - s.mean_u)).sum() / (n - 1);
  return s;
}

// Max z-score between two samples (or a sample and exact values, n = 0 meaning exact)
// of a bivariate Gaussian with covariance `cov`.
double max_z(const Sample2& a, const Sample2& b, const TransitionCovariance<double>& cov) {
  auto inv = [](std::size_t n) { return n == 0 ? 0.0 : 1.0 / static_cast<double>(n); };
  const double w = inv(a.n) + inv(b.n);
  const double se_mx = std::sqrt(cov.xx * w);
  const double se_mu = std::sqrt(cov.uu * w);
  const double se_vx = cov.xx * std::sqrt(2 * w);
  const double se_vu = cov.uu * std::sqrt(2 * w);
  const double se_c = std::sqrt((cov.xx * cov.uu + cov.ux * cov.ux) * w);
  return std::max({std::abs(a.mean_x - b.mean_x) / se_mx, std::abs(a.mean_u - b.mean_u) / se_mu,
                   std::abs(a.var_x - b.var_x) / se_vx, std::abs(a.var_u - b.var_u) / se_vu,
                   std::abs(a.cov_xu - b.cov_xu) / se_c});
}

struct TransitionPoint {
  double x0, u0, g;
};

TransitionPoint transition_point(std::size_t index) {
  Inputs in(100 + static_cast<std::uint32_t>(index));
  return {in.normal(), in.normal() * 0.1, in.normal() * 3.0};
}

Sample2 one_step_draws(const std::array<double, 3>& p, const TransitionPoint& tp, std::size_t n,
                       const ValidateOptions& o, std::uint64_t seed) {
  const auto& [g, e, h] = p;
  const FrozenGradientModel model(Vector::Constant(1, tp.g));
  ParticleCloud cloud;
  cloud.X = RowMatrix::Constant(static_cast<Eigen::Index>(n), 1, tp.x0);
  cloud.U = RowMatrix::Constant(static_cast<Eigen::Index>(n), 1, tp.u0);
  cloud.stream_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) cloud.stream_ids[i] = static_cast<std::uint32_t>(i);
  detail::exact_x_block(model, Vector::Zero(1), cloud, coefficients(g, e, h, o), {}, seed, 1,
                        RngDomain::kOracle, o.threads, true);
  return moments(cloud.X.col(0), cloud.U.col(0));
}

Sample2 exact_moments(const std::array<double, 3>& p, const TransitionPoint& tp) {
  const auto& [g, e, h] = p;
  const auto m = exact_transition_moments<double>(Vector::Constant(1, tp.x0), Vector::Constant(1, tp.u0),
                                                  Vector::Constant(1, tp.g), g, e, h);
  return {m.mean_x[0], m.mean_u[0], m.cov.xx, m.cov.uu, m.cov.ux, 0};
}

CheckResult transition_monte_carlo(const ValidateOptions& o) {
  double worst = 0.0;
  const auto& grid = monte_carlo_grid();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto tp = transition_point(k);
    const auto emp = one_step_draws(grid[k], tp, 100000, o, 11 + k);
    const auto& [g, e, h] = grid[k];
    worst = std::max(worst, max_z(emp, exact_moments(grid[k], tp), transition_covariance(g, e, h)));
  }
  return make("transition_monte_carlo", worst, 5.0,
              "max z-score of 1e5 one-step draws against the analytic moments, 12 grid points");
}

CheckResult transition_em_oracle(const ValidateOptions& o) {
  constexpr std::size_t kPaths = 20000;
  double worst = 0.0;
  const auto& grid = monte_carlo_grid();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto tp = transition_point(k);
    const auto& [g, e, h] = grid[k];
    const auto emp = one_step_draws(grid[k], tp, 100000, o, 11 + k);
    // Independent 1-D paths as the coordinates of one simulation.
    const auto n = static_cast<Eigen::Index>(kPaths);
    const auto [x, u] = em_fine_simulate(Vector::Constant(n, tp.x0), Vector::Constant(n, tp.u0),
                                         Vector::Constant(n, tp.g), g, e, h, 2000,
                                         RngSpec{17, static_cast<std::uint32_t>(k), 0, RngDomain::kOracle});
    worst = std::max(worst, max_z(emp, moments(x, u), transition_covariance(g, e, h)));
  }
  return make("transition_em_oracle", worst, 5.0,
              "max z-score of one-step draws against 2e4 Euler-Maruyama paths with 2000 substeps");
}

CheckResult gibbs_stationarity(const ValidateOptions& o) {
  Inputs in(3);
  const Vector y = in.normals(3) * 2.0;
  const ToyHM model(y, 1.0);
  const double theta_star = toyhm_mle(y);
  const auto post = toyhm_posterior(theta_star, y, 1.0);
  const MomentumParams p;
  constexpr Eigen::Index kParticles = 100000;
  ParticleCloud cloud;
  cloud.X.resize(kParticles, y.size());
  cloud.U.resize(kParticles, y.size());
  cloud.stream_ids.resize(kParticles);
  for (Eigen::Index i = 0; i < kParticles; ++i) {
    NormalStream z(RngSpec{23, static_cast<std::uint32_t>(i), 0, RngDomain::kOracle});
    for (Eigen::Index j = 0; j < y.size(); ++j) {
      cloud.X(i, j) = post.mean[j] + std::sqrt(post.variance) * z.next();
      cloud.U(i, j) = z.next() / std::sqrt(p.eta_x);
    }
    cloud.stream_ids[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(i);
  }
  detail::exact_x_block(model, Vector::Constant(1, theta_star), cloud, coefficients(p.gamma_x, p.eta_x, p.h_x, o),
                        {}, 29, 1, RngDomain::kOracle, o.threads, true);
  double worst = 0.0;
  const TransitionCovariance<double> target{post.variance, 0.0, 1.0 / p.eta_x};
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    const Sample2 exact{post.mean[j], 0.0, post.variance, 1.0 / p.eta_x, 0.0, 0};
    worst = std::max(worst, max_z(moments(cloud.X.col(j), cloud.U.col(j)), exact, target));
  }
  return make("gibbs_stationarity", worst, 5.0,
              "max z-score of (X, U) moments after one step from the extended target, 1e5 particles");
}

CheckResult free_energy_sandwich(const ValidateOptions&) {
  Inputs in(4);
  double worst = -1e300;
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(in.uniform(0, 6));
    const Vector y = in.normals(d) * in.uniform(0.1, 5.0);
    const double sigma2 = in.uniform(0.1, 10.0);
    const double theta = in.normal() * 4.0;
    DiagonalGaussianMoments q{in.normals(d) * 3.0, Vector::NullaryExpr(d, [&](Eigen::Index) { return in.uniform(0.01, 4.0); }),
                              in.normals(d), Vector::NullaryExpr(d, [&](Eigen::Index) { return in.uniform(0.001, 2.0); })};
    MomentumParams p;
    p.eta_theta = in.uniform(0.1, 500.0);
    p.eta_x = in.uniform(0.1, 500.0);
    const Vector m = in.normals(1);
    const double nll = -ToyHM(y, sigma2).log_marginal(theta);
    const double e = toyhm_free_energy(theta, q.x_mean, q.x_var, y, sigma2);
    const double f = momentum_free_energy(theta, m, q, p, y, sigma2);
    worst = std::max({worst, nll - e, e - f});
  }
  return make("free_energy_sandwich", worst, 1e-10,
              "max violation of -log p <= E <= F over 1000 random (theta, m, q)");
}

CheckResult free_energy_routes(const ValidateOptions&) {
  Inputs in(5);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(in.uniform(0, 5));
    const Vector y = in.normals(d) * 2.0;
    const double sigma2 = in.uniform(0.2, 5.0);
    const double theta = in.normal() * 2.0;
    const Vector m = in.normals(1);
    DiagonalGaussianMoments q{in.normals(d), Vector::NullaryExpr(d, [&](Eigen::Index) { return in.uniform(0.05, 3.0); }),
                              in.normals(d), Vector::NullaryExpr(d, [&](Eigen::Index) { return in.uniform(0.01, 1.0); })};
    MomentumParams p;
    p.eta_x = in.uniform(0.5, 50.0);
    const auto linear = GaussianLinearModel::from_toyhm(ToyHM(y, sigma2));
    Vector mean(2 * d);
    mean << q.x_mean, q.u_mean;
    Vector var(2 * d);
    var << q.x_var, q.u_var;
    const Matrix cov = var.asDiagonal();
    const double a = momentum_free_energy(theta, m, q, p, y, sigma2);
    const double b = gaussian_momentum_free_energy(linear, Vector::Constant(1, theta), m, mean, cov, p);
    worst = std::max(worst, std::abs(a - b) / (1.0 + std::abs(a)));
  }
  return make("free_energy_routes", worst, 1e-10,
              "ToyHM closed form vs the general quadratic-model route, relative gap");
}

struct FlowSetup {
  GaussianLinearModel model;
  MomentumParams params;
  GaussianFlowState init;
  double t_end;
  double dt;
};

FlowSetup flow_setup(double gamma_theta, double eta_theta, double gamma_x, double eta_x, double t_end,
                     double dt) {
  Inputs in(6);
  const Eigen::Index d = 5;
  const Vector y = in.normals(d) * 1.5 + Vector::Constant(d, 2.0);
  auto model = GaussianLinearModel::from_toyhm(ToyHM(y, 1.0));
  MomentumParams p{gamma_theta, eta_theta, gamma_x, eta_x, 1e-3, 1e-3};
  GaussianFlowState s;
  s.theta = Vector::Constant(1, -3.0);
  s.m = Vector::Constant(1, 0.5);
  s.mean = Vector::Zero(2 * d);
  s.mean.head(d) = in.normals(d);
  Matrix a = Matrix::Identity(2 * d, 2 * d);
  a.diagonal().head(d).setConstant(1.5);
  a.diagonal().tail(d).setConstant(0.7);
  a(0, 1) = a(1, 0) = 0.3;
  a(0, d) = a(d, 0) = 0.2;
  s.cov = a;
  return {std::move(model), p, std::move(s), t_end, dt};
}

std::vector<FlowSetup> flow_setups() {
  std::vector<FlowSetup> out;
  out.push_back(flow_setup(4.0, 1.0, 4.0, 1.0, 40.0, 2.5e-3));
  out.push_back(flow_setup(1.0, 1.0, 1.0, 1.0, 40.0, 2.5e-3));
  out.push_back(flow_setup(0.3, 2.0, 0.5, 3.0, 40.0, 2.5e-3));
  return out;
}

std::vector<double> flow_energies(const FlowSetup& s, const std::vector<GaussianFlowSample>& path) {
  std::vector<double> f;
  f.reserve(path.size());
  for (const auto& p : path) {
    f.push_back(gaussian_momentum_free_energy(s.model, p.state.theta, p.state.m, p.state.mean, p.state.cov, s.params));
  }
  return f;
}

CheckResult flow_stationary(const ValidateOptions&) {
  double worst = 0.0;
  for (const auto& s : flow_setups()) {
    const auto start = gaussian_flow_minimizer(s.model, s.params);
    const auto path = gaussian_moment_flow(s.model, s.params, start, 5.0, s.dt, 100);
    for (const auto& p : path) {
      worst = std::max({worst, (p.state.theta - start.theta).cwiseAbs().maxCoeff(),
                        (p.state.m - start.m).cwiseAbs().maxCoeff(),
                        (p.state.mean - start.mean).cwiseAbs().maxCoeff(),
                        (p.state.cov - start.cov).cwiseAbs().maxCoeff()});
    }
  }
  return make("moment_flow_stationary", worst, 1e-10, "max drift of the moments started at the minimizer");
}

CheckResult flow_monotone(const ValidateOptions&) {
  double worst = -1e300;
  for (const auto& s : flow_setups()) {
    const auto f = flow_energies(s, gaussian_moment_flow(s.model, s.params, s.init, s.t_end, s.dt));
    for (std::size_t k = 1; k < f.size(); ++k) worst = std::max(worst, f[k] - f[k - 1]);
  }
  return make("moment_flow_monotone", worst, 1e-12,
              "max one-step increase of F along three moment-flow trajectories");
}

CheckResult flow_exponential_tail(const ValidateOptions&) {
  const auto s = flow_setups().front();
  const auto path = gaussian_moment_flow(s.model, s.params, s.init, s.t_end, s.dt, 10);
  const auto f = flow_energies(s, path);
  const auto star = gaussian_flow_minimizer(s.model, s.params);
  const double f_star = gaussian_momentum_free_energy(s.model, star.theta, star.m, star.mean, star.cov, s.params);
  std::vector<double> t;
  std::vector<double> v;
  for (std::size_t k = path.size() / 2; k < path.size(); ++k) {
    t.push_back(path[k].time);
    v.push_back(std::log(f[k] - f_star));
  }
  const bool decreasing = v.back() < v.front();
  const double r2 = linear_fit_r2(t, v);
  std::ostringstream d;
  d << "R^2 of log(F - E*) on the second half of the trajectory; log gap falls from " << v.front() << " to "
    << v.back();
  return make("moment_flow_exponential_tail", decreasing ? r2 : 0.0, 0.99, d.str(), false);
}

CheckResult flow_dt_halving(const ValidateOptions&) {
  // Compared mid-transient, where the excess free energy is still large.
  constexpr double kHorizon = 5.0;
  double worst = 0.0;
  for (const auto& s : flow_setups()) {
    const auto star = gaussian_flow_minimizer(s.model, s.params);
    const double f_star = gaussian_momentum_free_energy(s.model, star.theta, star.m, star.mean, star.cov, s.params);
    const auto coarse = gaussian_moment_flow(s.model, s.params, s.init, kHorizon, s.dt, 1000000);
    const auto fine = gaussian_moment_flow(s.model, s.params, s.init, kHorizon, s.dt / 2, 1000000);
    const auto& a = coarse.back().state;
    const auto& b = fine.back().state;
    const double fa = gaussian_momentum_free_energy(s.model, a.theta, a.m, a.mean, a.cov, s.params);
    const double fb = gaussian_momentum_free_energy(s.model, b.theta, b.m, b.mean, b.cov, s.params);
    worst = std::max(worst, std::abs(fa - fb) / (fb - f_star));
  }
  return make("moment_flow_dt_halving", worst, 1e-8,
              "change of F(t = 5) when dt is halved, relative to the excess F - E*");
}

const std::vector<std::pair<std::string, Check>>& all_checks() {
  static const std::vector<std::pair<std::string, Check>> checks{
      {"rng_moments", rng_moments},
      {"model_gradients", model_gradients},
      {"toyhm_hessian_spectrum", toyhm_spectrum},
      {"toyhm_lipschitz", toyhm_lipschitz_check},
      {"toyhm_negative_definite", toyhm_concavity},
      {"toyhm_mle", toyhm_mle_check},
      {"transition_cholesky", transition_cholesky},
      {"transition_series_crossover", series_crossover},
      {"transition_monte_carlo", transition_monte_carlo},
      {"transition_em_oracle", transition_em_oracle},
      {"gibbs_stationarity", gibbs_stationarity},
      {"free_energy_sandwich", free_energy_sandwich},
      {"free_energy_routes", free_energy_routes},
      {"moment_flow_stationary", flow_stationary},
      {"moment_flow_monotone", flow_monotone},
      {"moment_flow_exponential_tail", flow_exponential_tail},
      {"moment_flow_dt_halving", flow_dt_halving}};
  return checks;
}

}  // namespace

std::vector<std::string> validation_check_names() {
  std::vector<std::string> names;
  for (const auto& [name, check] : all_checks()) names.push_back(name);
  return names;
}

ValidationReport run_validation(const ValidateOptions& options) {
  for (const auto& name : options.only) {
    const auto names = validation_check_names();
    require(std::find(names.begin(), names.end(), name) != names.end(), "validate: unknown check '" + name + "'");
  }
  ValidationReport report;
  for (const auto& [name, check] : all_checks()) {
    if (!options.only.empty() && std::find(options.only.begin(), options.only.end(), name) == options.only.end()) {
      continue;
    }
    try {
      report.checks.push_back(check(options));
    } catch (const std::exception& e) {
      report.checks.push_back({name, false, std::nan(""), 0.0, std::string("exception: ") + e.what()});
    }
  }
  return report;
}

}  // namespace mpd
