#pragma once

#include "mpd/model.hpp"

namespace mpd {

/// Running average of squared free-energy gradients.
struct RmsPropState {
  Vector G;  ///< elementwise, starts at 0
  double beta = 0.9;
  double eps = 1e-8;

  static RmsPropState zeros(Eigen::Index dim, double beta = 0.9, double eps = 1e-8);
};

/// G' = beta G + (1 - beta) grad^2, elementwise.
RmsPropState rmsprop_update(const RmsPropState& state, const Vector& grad);

/// grad / (sqrt(G) + eps), elementwise.
Vector precondition(const Vector& grad, const RmsPropState& state);

/// Momentum-coefficient heuristic: the eta that gives mu = 1 - h gamma eta.
double eta_from_mu(double mu, double gamma, double h);

}  // namespace mpd
