#include <gtest/gtest.h>

#include <json.hpp>
#include <set>

#include "mpd/validate.hpp"

using namespace mpd;

TEST(Validate, CheckNamesAreUniqueAndStable) {
  const auto names = validation_check_names();
  EXPECT_EQ(names.size(), 17u);
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), names.size());
  EXPECT_EQ(names.front(), "rng_moments");
  EXPECT_EQ(names.back(), "moment_flow_dt_halving");
}

TEST(Validate, FilterRunsOnlyNamedChecksInReportOrder) {
  ValidateOptions options;
  options.only = {"toyhm_mle", "transition_cholesky", "toyhm_lipschitz"};
  const auto report = run_validation(options);
  ASSERT_EQ(report.checks.size(), 3u);
  EXPECT_EQ(report.checks[0].name, "toyhm_lipschitz");
  EXPECT_EQ(report.checks[1].name, "toyhm_mle");
  EXPECT_EQ(report.checks[2].name, "transition_cholesky");
  EXPECT_TRUE(report.passed());
  options.only = {"no_such_check"};
  EXPECT_THROW(run_validation(options), ContractViolation);
}

TEST(Validate, InjectedFaultBreaksCholeskyCheck) {
  ValidateOptions options;
  options.only = {"transition_cholesky", "toyhm_mle"};
  options.l_uu_scale = 1.1;
  const auto report = run_validation(options);
  EXPECT_FALSE(report.passed());
  EXPECT_TRUE(report.checks[0].passed);
  EXPECT_FALSE(report.checks[1].passed);
}

TEST(Validate, JsonSchema) {
  ValidationReport report;
  report.checks.push_back({"a", true, 0.5, 1.0, "first"});
  report.checks.push_back({"b", false, std::nan(""), 2.0, "second"});
  const auto j = nlohmann::json::parse(report.to_json());
  EXPECT_EQ(j["passed"], false);
  ASSERT_EQ(j["checks"].size(), 2u);
  EXPECT_EQ(j["checks"][0]["name"], "a");
  EXPECT_EQ(j["checks"][0]["observed"], 0.5);
  EXPECT_TRUE(j["checks"][1]["observed"].is_null());
  EXPECT_EQ(j["checks"][1]["detail"], "second");
}

TEST(Validate, LinearFitR2) {
  EXPECT_DOUBLE_EQ(linear_fit_r2({0, 1, 2, 3}, {1, 3, 5, 7}), 1.0);
  EXPECT_DOUBLE_EQ(linear_fit_r2({0, 1, 2}, {4, 4, 4}), 1.0);
  EXPECT_NEAR(linear_fit_r2({-1, 0, 1}, {1, 0, 1}), 0.0, 1e-15);
  EXPECT_THROW(linear_fit_r2({0, 1}, {0, 1}), ContractViolation);
}

TEST(Validate, CholeskyReconstructionError) {
  for (double h : {1e-6, 1e-3, 0.5, 20.0}) {
    const auto c = transition_coefficients(0.7, 3.0, h);
    EXPECT_LT(cholesky_reconstruction_error(c, 0.7, 3.0, h), 1e-12) << h;
    auto bad = c;
    bad.L_uu *= 1.1;
    EXPECT_GT(cholesky_reconstruction_error(bad, 0.7, 3.0, h), 1e-4) << h;
  }
}
