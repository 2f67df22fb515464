#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "mpd/rng.hpp"
#include "mpd/state.hpp"
#include "mpd/toy_hm.hpp"

using namespace mpd;

TEST(Philox, KnownAnswerVectors) {
  using W = std::array<std::uint32_t, 4>;
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}), (W{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (W{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (W{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(GaussianDraw, MomentsOfAMillionDraws) {
  const Eigen::VectorXd z = gaussian_draw(RngSpec{42, 0, 0, RngDomain::kOracle}, 1000000);
  const double mean = z.mean();
  const double var = (z.array() - mean).square().mean();
  EXPECT_GE(mean, -0.004);
  EXPECT_LE(mean, 0.004);
  EXPECT_GE(var, 0.994);
  EXPECT_LE(var, 1.006);
}

TEST(GaussianDraw, SameSpecSameSequence) {
  const RngSpec spec{7, 3, 11, RngDomain::kStep};
  EXPECT_EQ(gaussian_draw(spec, 1001), gaussian_draw(spec, 1001));
}

TEST(GaussianDraw, EveryCoordinateOfTheSpecSelectsADistinctStream) {
  const RngSpec base{7, 3, 11, RngDomain::kStep};
  const Eigen::VectorXd a = gaussian_draw(base, 16);
  for (RngSpec other : {RngSpec{8, 3, 11, RngDomain::kStep}, RngSpec{7, 4, 11, RngDomain::kStep},
                        RngSpec{7, 3, 12, RngDomain::kStep}, RngSpec{7, 3, 11, RngDomain::kInit}}) {
    const Eigen::VectorXd b = gaussian_draw(other, 16);
    EXPECT_GT((a - b).cwiseAbs().minCoeff(), 0.0);
  }
}

TEST(NormalStream, RandomAccessMatchesSequentialReads) {
  const RngSpec spec{5, 1, 2, RngDomain::kCatchUp};
  NormalStream stream(spec);
  for (std::uint64_t n = 0; n < 37; ++n) EXPECT_EQ(stream.next(), normal_at(spec, n));
  NormalStream odd(spec, 5);
  EXPECT_EQ(odd.next(), normal_at(spec, 5));
  EXPECT_EQ(odd.next(), normal_at(spec, 6));
  odd.seek(1);
  EXPECT_EQ(odd.next(), normal_at(spec, 1));
  EXPECT_EQ(odd.position(), 2u);
}

TEST(NormalStream, UniformsLieInOpenInterval) {
  const RngSpec spec{1, 0, 0, RngDomain::kOracle};
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = uniform_at(spec, static_cast<std::uint64_t>(i));
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
}

namespace {

ToyHM toy(Eigen::Index n) { return ToyHM(Vector::LinSpaced(n, -1.0, 1.0), 1.0); }

}  // namespace

TEST(InitState, PointMassAtZero) {
  const auto model = toy(4);
  CloudInit init;
  init.kind = CloudInit::Kind::kPointMass;
  const auto [state, cloud] = init_state(model, 3, Vector::Constant(1, 2.0), init, 0);
  EXPECT_TRUE(cloud.X.isZero(0.0));
  EXPECT_TRUE(cloud.U.isZero(0.0));
  EXPECT_EQ(state.theta[0], 2.0);
  EXPECT_TRUE(state.m.isZero(0.0));
  EXPECT_EQ(cloud.stream_ids, (std::vector<std::uint32_t>{0, 1, 2}));
  EXPECT_EQ(cloud.missed, (std::vector<std::uint64_t>(4, 0)));
}

TEST(InitState, DeterministicForFixedSeed) {
  const auto model = toy(6);
  CloudInit init;
  init.mean = Vector::Constant(1, -5.0);
  const auto a = init_state(model, 10, Vector::Zero(1), init, 17);
  const auto b = init_state(model, 10, Vector::Zero(1), init, 17);
  const auto c = init_state(model, 10, Vector::Zero(1), init, 18);
  EXPECT_EQ(a.second.X, b.second.X);
  EXPECT_NE(a.second.X, c.second.X);
}

TEST(InitState, GaussianCloudMean) {
  const auto model = toy(1);
  CloudInit init;
  init.mean = Vector::Constant(1, 1.5);
  const auto [state, cloud] = init_state(model, 100000, Vector::Zero(1), init, 3);
  EXPECT_NEAR(cloud.X.col(0).mean(), 1.5, 4.0 / std::sqrt(1e5));
}

TEST(InitState, StationaryMomentumVariance) {
  const auto model = toy(2);
  CloudInit init;
  init.momentum_precision = 4.0;
  const auto [state, cloud] = init_state(model, 50000, Vector::Zero(1), init, 3);
  const double var = cloud.U.array().square().mean();
  EXPECT_NEAR(var, 0.25, 5 * 0.25 * std::sqrt(2.0 / 1e5));
}

TEST(InitState, RejectsBadArguments) {
  const auto model = toy(3);
  EXPECT_THROW(init_state(model, 0, Vector::Zero(1), {}, 0), ContractViolation);
  EXPECT_THROW(init_state(model, 2, Vector::Zero(2), {}, 0), ContractViolation);
  CloudInit bad;
  bad.mean = Vector::Zero(2);
  EXPECT_THROW(init_state(model, 2, Vector::Zero(1), bad, 0), ContractViolation);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto model = toy(5);
  CloudInit init;
  init.momentum_precision = 3.0;
  auto [state, cloud] = init_state(model, 4, Vector::Constant(1, 1.0 / 3.0), init, 9);
  state.m[0] = -std::nextafter(0.1, 1.0);
  cloud.missed = {0, 3, 1, 0, 7};
  const Checkpoint saved{state, cloud, 9, 123};

  const auto path = std::filesystem::temp_directory_path() / "mpd_checkpoint_test.json";
  save_checkpoint(saved, path);
  const Checkpoint loaded = load_checkpoint(path);
  std::filesystem::remove(path);

  EXPECT_EQ(loaded.seed, 9u);
  EXPECT_EQ(loaded.iteration, 123u);
  EXPECT_EQ(loaded.state.theta, saved.state.theta);
  EXPECT_EQ(loaded.state.m, saved.state.m);
  EXPECT_EQ(loaded.cloud.X, saved.cloud.X);
  EXPECT_EQ(loaded.cloud.U, saved.cloud.U);
  EXPECT_EQ(loaded.cloud.stream_ids, saved.cloud.stream_ids);
  EXPECT_EQ(loaded.cloud.missed, saved.cloud.missed);
  EXPECT_EQ(checkpoint_to_json(loaded), checkpoint_to_json(saved));
}

TEST(Checkpoint, RejectsInconsistentText) {
  EXPECT_THROW(checkpoint_from_json(R"({"seed":0,"iteration":0,"theta":[1],"m":[1,2],"X":[[0]],"U":[[0]],"stream_ids":[0],"missed":[]})"),
               ContractViolation);
  EXPECT_THROW(checkpoint_from_json(R"({"seed":0,"iteration":0,"theta":[1],"m":[1],"X":[[0],[1]],"U":[[0],[1]],"stream_ids":[0],"missed":[]})"),
               ContractViolation);
}
