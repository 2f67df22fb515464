#include "mpd/extras.hpp"

#include <cmath>

namespace mpd {

RmsPropState RmsPropState::zeros(Eigen::Index dim, double beta, double eps) {
  require(beta > 0.0 && beta < 1.0, "rmsprop: beta must lie in (0, 1)");
  require(eps > 0.0, "rmsprop: eps must be positive");
  return RmsPropState{Vector::Zero(dim), beta, eps};
}

RmsPropState rmsprop_update(const RmsPropState& state, const Vector& grad) {
  require(state.G.size() == grad.size(), "rmsprop_update: dimension mismatch");
  RmsPropState next = state;
  next.G = state.beta * state.G.array() + (1.0 - state.beta) * grad.array().square();
  return next;
}

Vector precondition(const Vector& grad, const RmsPropState& state) {
  require(state.G.size() == grad.size(), "precondition: dimension mismatch");
  return (grad.array() / (state.G.array().sqrt() + state.eps)).matrix();
}

double eta_from_mu(double mu, double gamma, double h) {
  require(mu >= 0.0 && mu < 1.0, "eta_from_mu: mu must lie in [0, 1)");
  require(gamma > 0.0 && h > 0.0, "eta_from_mu: gamma and h must be positive");
  return (1.0 - mu) / (h * gamma);
}

}  // namespace mpd
