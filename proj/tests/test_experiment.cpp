#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mpd/experiment.hpp"
#include "mpd/toy_hm.hpp"

using namespace mpd;

namespace {

ExperimentConfig small_toyhm(std::uint64_t iterations = 200) {
  ExperimentConfig c = preset("fig1a-critical");
  c.model.data.n = 10;
  c.particles = 8;
  c.iterations = iterations;
  c.record_every = 10;
  return c;
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ParseConfig, EmptyObjectGivesDefaults) {
  const auto c = parse_config("{}");
  EXPECT_EQ(c.model.kind, ModelConfig::Kind::kToyHM);
  EXPECT_EQ(c.variant.algorithm, Algorithm::kMPDExp);
  EXPECT_EQ(c.particles, 100u);
  EXPECT_EQ(c.metrics, std::vector<std::string>{"param_error"});
}

TEST(ParseConfig, ReadsNestedKeys) {
  const auto c = parse_config(R"({
    "model": {"name": "toyhm", "sigma2": 2.0, "data": {"n": 7, "theta": 3.0}},
    "algorithm": {"name": "mpd", "correction": "none"},
    "params": {"h_theta": 0.001, "h_x": 0.01, "gamma_theta": 0.5, "mu_theta": 0.9},
    "particles": 12, "iterations": 30, "seed": 4, "metrics": ["param_error", "nll"]
  })");
  EXPECT_EQ(c.model.sigma2, 2.0);
  EXPECT_EQ(c.model.data.n, 7u);
  EXPECT_EQ(c.variant.correction, GradientCorrection::kNone);
  EXPECT_NEAR(1.0 - c.params.h_theta * c.params.gamma_theta * c.params.eta_theta, 0.9, 1e-12);
  EXPECT_EQ(c.particles, 12u);
  EXPECT_EQ(c.seed, 4u);
}

TEST(ParseConfig, UnknownKeyIsReportedWithItsLine) {
  const auto message = config_error("{\n  \"particles\": 3,\n  \"particels\": 4\n}");
  EXPECT_EQ(message.rfind("config:3:", 0), 0u) << message;
  EXPECT_NE(message.find("particels"), std::string::npos);
}

TEST(ParseConfig, RejectsInvalidValues) {
  EXPECT_EQ(config_error("{\"particles\": 0}").rfind("config:", 0), 0u);
  EXPECT_FALSE(config_error("{\"params\": {\"h_theta\": -1}}").empty());
  EXPECT_FALSE(config_error("{\"params\": {\"eta_theta\": 1, \"mu_theta\": 0.5}}").empty());
  EXPECT_FALSE(config_error("{\"metrics\": [\"w1\"]}").empty());
  EXPECT_FALSE(config_error("{\"metrics\": [\"nll\", \"nll\"]}").empty());
  EXPECT_FALSE(config_error("{\"algorithm\": {\"name\": \"adam\"}}").empty());
  EXPECT_FALSE(config_error("{\"algorithm\": {\"name\": \"mpd\", \"mu\": 0.5}}").empty());
  EXPECT_FALSE(config_error("{\"params\": {\"gamma_theta\": 0}}").empty());
  EXPECT_EQ(config_error("{\n\"particles\": 3,,\n}").rfind("config:2:", 0), 0u);
}

TEST(ParseConfig, PresetsRoundTripThroughJson) {
  for (const auto& name : preset_names()) {
    const auto c = preset(name);
    const auto text = config_to_json(c);
    const auto back = parse_config(text);
    EXPECT_EQ(config_to_json(back), text) << name;
  }
  EXPECT_THROW(preset("fig9"), ConfigError);
}

TEST(ParseConfig, LoadsFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "mpd_test_config.json";
  std::ofstream(path) << R"({"iterations": 5})";
  EXPECT_EQ(load_config(path).iterations, 5u);
  std::filesystem::remove(path);
  EXPECT_THROW(load_config(path), ConfigError);
}

TEST(Dataset, LoadsOneNumberPerLine) {
  const auto path = std::filesystem::temp_directory_path() / "mpd_test_data.txt";
  std::ofstream(path) << "1.5\n\n -2\n3e1\n";
  const Vector y = load_dataset(path);
  ASSERT_EQ(y.size(), 3);
  EXPECT_EQ(y[2], 30.0);
  std::ofstream(path) << "1.5\nabc\n";
  try {
    load_dataset(path);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("dataset:2:", 0), 0u);
  }
  std::filesystem::remove(path);
}

TEST(Dataset, CenteringAndMixture) {
  ExperimentConfig c = preset("fig2-enrichment");
  EXPECT_NEAR(build_dataset(c).mean(), 10.0, 1e-12);
  const Vector y = build_dataset(preset("mog-density"));
  EXPECT_EQ(y.size(), 100);
  const auto near_plus = (y.array() > 0).count();
  EXPECT_GT(near_plus, 30);
  EXPECT_LT(near_plus, 70);
}

TEST(RunExperiment, ZeroIterationsRecordsOnlyTheStart) {
  auto c = small_toyhm(0);
  const auto r = run_experiment(c);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.trace[0].iteration, 0u);
  EXPECT_EQ(r.trace[0].theta[0], 0.0);
  EXPECT_FALSE(r.diverged);
}

TEST(RunExperiment, RecordsGridAndLastIteration) {
  auto c = small_toyhm(95);
  const auto r = run_experiment(c);
  ASSERT_EQ(r.trace.size(), 11u);
  EXPECT_EQ(r.trace[9].iteration, 90u);
  EXPECT_EQ(r.trace.back().iteration, 95u);
  EXPECT_EQ(metric_curve(r, "param_error").size(), 10u);
}

TEST(RunExperiment, SameSeedGivesIdenticalCsv) {
  auto c = small_toyhm();
  const auto a = trace_csv(c, run_experiment(c));
  EXPECT_EQ(a, trace_csv(c, run_experiment(c)));
  c.seed = 1;
  EXPECT_NE(a, trace_csv(c, run_experiment(c)));
}

TEST(RunExperiment, ThreadCountDoesNotChangeResults) {
  for (const auto& name : {"fig1a-critical", "fig1b-integrators", "mog-density"}) {
    auto c = preset(name);
    c.iterations = 50;
    c.particles = std::min<std::size_t>(c.particles, 16);
    c.threads = 1;
    const auto one = trace_csv(c, run_experiment(c));
    c.threads = 8;
    EXPECT_EQ(one, trace_csv(c, run_experiment(c))) << name;
  }
}

TEST(RunExperiment, CsvLayout) {
  auto c = small_toyhm(10);
  const auto csv = trace_csv(c, run_experiment(c));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,wallclock,theta_0,param_error,nll");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

TEST(RunExperiment, SummaryEchoesConfig) {
  auto c = small_toyhm(10);
  const auto s = summary_json(c, run_experiment(c));
  EXPECT_NE(s.find("\"diverged\": false"), std::string::npos);
  EXPECT_NE(s.find("\"final\""), std::string::npos);
  EXPECT_NE(s.find("\"config\""), std::string::npos);
}

TEST(RunExperiment, DivergenceStopsEarly) {
  auto c = small_toyhm(1000);
  c.variant = VariantConfig::pgd();
  c.params.h_theta = 10.0;
  const auto r = run_experiment(c);
  EXPECT_TRUE(r.diverged);
  EXPECT_LT(r.last_iteration, 1000u);
  EXPECT_EQ(r.trace.back().iteration, r.last_iteration);
}

TEST(RunExperiment, SubsamplingAndPreconditioningRun) {
  auto c = small_toyhm(100);
  c.subsampling = SubsampleConfig{5, CatchUpMode::kRepeated};
  EXPECT_FALSE(run_experiment(c).diverged);
  c.subsampling = SubsampleConfig{11, CatchUpMode::kSingle};
  EXPECT_THROW(run_experiment(c), ConfigError);
  c.subsampling.reset();
  c.preconditioner = PreconditionerConfig{};
  EXPECT_FALSE(run_experiment(c).diverged);
}

TEST(RunExperiment, CriticalPresetConverges) {
  const auto r = run_experiment(preset("fig1a-critical"));
  EXPECT_LT(r.trace.back().metric("param_error"), 0.5);
}

TEST(RunExperiment, NesterovLagsExponentialIntegrator) {
  for (double mu : {0.5, 0.8, 0.9}) {
    auto nc = preset("fig1b-integrators");
    nc.nc_mu = mu;
    nc.params.eta_theta = eta_from_mu(mu, nc.params.gamma_theta, nc.params.h_theta);
    auto exp = nc;
    exp.variant = VariantConfig::mpd();
    exp.nc_mu.reset();
    const auto a = run_experiment(nc).trace.back().metric("param_error");
    const auto b = run_experiment(exp).trace.back().metric("param_error");
    EXPECT_LT(b, a) << mu;
  }
}

TEST(Compare, IdenticalConfigsScoreZeroAndSwapNegates) {
  const auto mpd = small_toyhm();
  const auto pgd = as_pgd(mpd);
  EXPECT_EQ(compare(mpd, mpd, "param_error").abc, 0.0);
  const double forward = compare(pgd, mpd, "param_error").abc;
  EXPECT_GT(forward, 0.0);
  EXPECT_DOUBLE_EQ(compare(mpd, pgd, "param_error").abc, -forward);
}

TEST(Compare, RejectsMismatchedRuns) {
  const auto a = small_toyhm();
  auto b = a;
  b.seed = 3;
  EXPECT_THROW(compare(a, b, "param_error"), ConfigError);
  b = a;
  b.model.data.n = 11;
  EXPECT_THROW(compare(a, b, "param_error"), ConfigError);
  b = a;
  b.iterations = 7;
  EXPECT_THROW(compare(a, b, "param_error"), ConfigError);
  EXPECT_THROW(compare(a, a, "loss"), ConfigError);
}

TEST(Sweep, GridMatchesIndividualCompares) {
  auto base = small_toyhm(300);
  base.threads = 2;
  const SweepConfig grid{{0.3, 0.7}, {1.0, 403.96}, "param_error"};
  const auto result = sweep(base, grid);
  ASSERT_EQ(result.abc.rows(), 2);
  ASSERT_EQ(result.abc.cols(), 2);
  auto cell = base;
  cell.threads = 1;
  cell.params.gamma_theta = cell.params.gamma_x = 0.7;
  cell.params.eta_theta = cell.params.eta_x = 403.96;
  EXPECT_DOUBLE_EQ(result.abc(1, 1), compare(as_pgd(cell), cell, "param_error").abc);
  EXPECT_GT(result.abc(1, 1), 0.0);
  const auto csv = sweep_csv(result);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "gamma\\eta,1,403.95999999999998");
}

TEST(Sweep, FailuresInsideTheGridPropagate) {
  auto base = small_toyhm(10);
  base.threads = 2;
  EXPECT_THROW(sweep(base, SweepConfig{{0.5}, {1.0}, "nll_missing"}), ContractViolation);
}
