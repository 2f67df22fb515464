#include "mpd/rng.hpp"

#include <cmath>
#include <numbers>

namespace mpd {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

// 53-bit uniform in (0, 1) built from two 32-bit words.
double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
  return (static_cast<double>(bits & ((1ull << 53) - 1)) + 0.5) * 0x1.0p-53;
}

std::array<std::uint32_t, 4> block(const RngSpec& spec, std::uint64_t index) {
  // Counter layout: [block index, epoch, stream, domain]. Blocks per
  // (stream, epoch, domain) wrap after 2^32, i.e. 2^33 normals.
  const std::array<std::uint32_t, 4> counter{
      static_cast<std::uint32_t>(index), spec.epoch, spec.stream,
      static_cast<std::uint32_t>(spec.domain)};
  const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(spec.seed),
                                         static_cast<std::uint32_t>(spec.seed >> 32)};
  return philox4x32(counter, key);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

namespace {

// Each Philox block yields two uniforms and, by Box-Muller, two normals.
std::array<double, 2> normal_pair(const RngSpec& spec, std::uint64_t pair) {
  const auto words = block(spec, pair);
  const double u1 = to_open_unit(words[0], words[1]);
  const double u2 = to_open_unit(words[2], words[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace

double normal_at(const RngSpec& spec, std::uint64_t n) { return normal_pair(spec, n / 2)[n % 2]; }

double uniform_at(const RngSpec& spec, std::uint64_t n) {
  const auto words = block(spec, n / 2);
  return (n % 2 == 0) ? to_open_unit(words[0], words[1]) : to_open_unit(words[2], words[3]);
}

double NormalStream::next() {
  const std::uint64_t pair = position_ / 2;
  if (pair != cached_pair_) {
    cached_ = normal_pair(spec_, pair);
    cached_pair_ = pair;
  }
  return cached_[position_++ % 2];
}

double NormalStream::next_uniform() { return uniform_at(spec_, position_++); }

void NormalStream::fill(Eigen::Ref<Eigen::VectorXd> out) {
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = next();
}

Eigen::VectorXd NormalStream::draw(Eigen::Index n) {
  Eigen::VectorXd out(n);
  fill(out);
  return out;
}

Eigen::VectorXd gaussian_draw(const RngSpec& spec, Eigen::Index n) {
  NormalStream stream(spec);
  return stream.draw(n);
}

}  // namespace mpd
