#pragma once

#include <string>
#include <vector>

#include "mpd/transition.hpp"

namespace mpd {

struct CheckResult {
  std::string name;
  bool passed = false;
  double observed = 0.0;  ///< worst statistic seen
  double expected = 0.0;  ///< the bound it is held to
  std::string detail;
};

struct ValidateOptions {
  /// Fault injection: scale L_uu by this factor wherever the suite builds
  /// transition coefficients. 1 leaves them intact.
  double l_uu_scale = 1.0;
  int threads = 1;
  /// Names of the checks to run; empty runs all of them.
  std::vector<std::string> only;
};

struct ValidationReport {
  std::vector<CheckResult> checks;

  bool passed() const;
  /// Stable schema: {"passed": bool, "checks": [{name, passed, observed,
  /// expected, detail}]} in a fixed check order.
  std::string to_json() const;
};

/// Names of all checks, in report order.
std::vector<std::string> validation_check_names();

/// Runs the oracle and invariant checks selected by `options.only`.
ValidationReport run_validation(const ValidateOptions& options = {});

/// ||L L^T - Sigma||_F / ||Sigma||_F against the closed-form covariance,
/// evaluated in extended precision.
double cholesky_reconstruction_error(const TransitionCoefficients<double>& c, double gamma,
                                     double eta, double h);

/// R^2 of the least-squares line through (t, v).
double linear_fit_r2(const std::vector<double>& t, const std::vector<double>& v);

}  // namespace mpd
