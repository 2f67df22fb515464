#include "mpd/state.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace mpd {

std::pair<ThetaState, ParticleCloud> init_state(const LatentModel& model, std::size_t particles,
                                                const Vector& theta0, const CloudInit& init,
                                                std::uint64_t seed) {
  require(particles >= 1, "init_state: need at least one particle");
  require(static_cast<std::size_t>(theta0.size()) == model.theta_dim(),
          "init_state: theta0 has the wrong dimension");
  const auto d = static_cast<Eigen::Index>(model.latent_dim());
  const auto m = static_cast<Eigen::Index>(particles);

  Vector mean;
  if (init.mean.size() == 0) {
    mean = Vector::Zero(d);
  } else if (init.mean.size() == 1) {
    mean = Vector::Constant(d, init.mean[0]);
  } else {
    require(init.mean.size() == d, "init_state: cloud mean has the wrong dimension");
    mean = init.mean;
  }
  require(init.stddev >= 0.0 && std::isfinite(init.stddev), "init_state: stddev must be >= 0");
  require(!init.momentum_precision || *init.momentum_precision > 0.0,
          "init_state: momentum precision must be positive");

  ThetaState state{theta0, Vector::Zero(theta0.size())};
  ParticleCloud cloud;
  cloud.X.resize(m, d);
  cloud.U = RowMatrix::Zero(m, d);
  cloud.stream_ids.resize(particles);
  cloud.missed.assign(model.num_blocks(), 0);

  for (Eigen::Index i = 0; i < m; ++i) {
    const auto stream = static_cast<std::uint32_t>(i);
    cloud.stream_ids[static_cast<std::size_t>(i)] = stream;
    NormalStream normals(RngSpec{seed, stream, 0, RngDomain::kInit});
    for (Eigen::Index j = 0; j < d; ++j) {
      const double z = normals.next();
      cloud.X(i, j) = init.kind == CloudInit::Kind::kGaussian ? mean[j] + init.stddev * z : mean[j];
    }
    if (init.momentum_precision) {
      const double sd = 1.0 / std::sqrt(*init.momentum_precision);
      for (Eigen::Index j = 0; j < d; ++j) cloud.U(i, j) = sd * normals.next();
    }
  }
  return {std::move(state), std::move(cloud)};
}

namespace {

using nlohmann::json;

json to_json_matrix(const RowMatrix& a) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    rows.push_back(std::vector<double>(a.row(i).data(), a.row(i).data() + a.cols()));
  }
  return rows;
}

RowMatrix from_json_matrix(const json& rows, Eigen::Index cols) {
  RowMatrix a(static_cast<Eigen::Index>(rows.size()), cols);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const auto row = rows.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
    require(static_cast<Eigen::Index>(row.size()) == cols, "checkpoint: ragged matrix");
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = row[static_cast<std::size_t>(j)];
  }
  return a;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& c) {
  json j;
  j["seed"] = c.seed;
  j["iteration"] = c.iteration;
  j["theta"] = to_std(c.state.theta);
  j["m"] = to_std(c.state.m);
  j["X"] = to_json_matrix(c.cloud.X);
  j["U"] = to_json_matrix(c.cloud.U);
  j["stream_ids"] = c.cloud.stream_ids;
  j["missed"] = c.cloud.missed;
  return j.dump(1);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  const json j = json::parse(text);
  Checkpoint c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.iteration = j.at("iteration").get<std::uint64_t>();
  c.state.theta = from_std(j.at("theta").get<std::vector<double>>());
  c.state.m = from_std(j.at("m").get<std::vector<double>>());
  require(c.state.theta.size() == c.state.m.size(), "checkpoint: theta and m differ in size");
  const auto& xs = j.at("X");
  require(!xs.empty(), "checkpoint: empty cloud");
  const auto cols = static_cast<Eigen::Index>(xs.at(0).size());
  c.cloud.X = from_json_matrix(xs, cols);
  c.cloud.U = from_json_matrix(j.at("U"), cols);
  require(c.cloud.U.rows() == c.cloud.X.rows(), "checkpoint: X and U differ in size");
  c.cloud.stream_ids = j.at("stream_ids").get<std::vector<std::uint32_t>>();
  c.cloud.missed = j.at("missed").get<std::vector<std::uint64_t>>();
  require(static_cast<Eigen::Index>(c.cloud.stream_ids.size()) == c.cloud.X.rows(),
          "checkpoint: one stream id per particle expected");
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), "checkpoint: cannot open " + path.string());
  out << checkpoint_to_json(checkpoint) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "checkpoint: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return checkpoint_from_json(buffer.str());
}

}  // namespace mpd
