#include "mpd/model.hpp"

namespace mpd {

Vector LatentModel::block_grad_theta(const Vector&, std::size_t, std::span<const double>) const {
  throw ContractViolation(name() + " does not factorize over data blocks");
}

Vector LatentModel::block_grad_x(const Vector&, std::size_t, std::span<const double>) const {
  throw ContractViolation(name() + " does not factorize over data blocks");
}

}  // namespace mpd
