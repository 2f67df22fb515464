#include "mpd/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "mpd/toy_hm.hpp"

namespace mpd {

using nlohmann::json;

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

double ExperimentConfig::effective_nc_mu() const {
  if (nc_mu) return *nc_mu;
  return 1.0 - params.h_theta * params.gamma_theta * params.eta_theta;
}

namespace {

// ---------------------------------------------------------------- parsing

const std::vector<std::string> kMetricNames{"param_error", "nll", "loss", "w1"};

class Locator {
 public:
  explicit Locator(const std::string& text) : text_(text) {}

  // Line of the last key in `path`, found by searching each key in turn.
  std::size_t line_of(const std::vector<std::string>& path) const {
    std::size_t pos = 0;
    bool found = false;
    for (const auto& key : path) {
      if (key.empty() || key.front() == '[') continue;
      const auto hit = text_.find('"' + key + '"', pos);
      if (hit == std::string::npos) break;
      pos = hit;
      found = true;
    }
    if (!found) return 0;
    return 1 + static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

 private:
  const std::string& text_;
};

std::string join_path(const std::vector<std::string>& path) {
  std::string out;
  for (const auto& key : path) {
    if (!out.empty() && key.front() != '[') out += '.';
    out += key;
  }
  return out.empty() ? "<root>" : out;
}

class Reader {
 public:
  Reader(const json& node, std::vector<std::string> path, const Locator& locator)
      : node_(node), path_(std::move(path)), locator_(locator) {
    if (!node_.is_object()) fail({}, "expected an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    auto path = path_;
    if (!key.empty()) path.push_back(key);
    const std::size_t line = locator_.line_of(path);
    std::string prefix = "config:";
    if (line > 0) prefix += std::to_string(line) + ":";
    throw ConfigError(prefix + " " + join_path(path) + ": " + message);
  }

  const json* find(const std::string& key) {
    used_.insert(key);
    const auto it = node_.find(key);
    if (it == node_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  Reader object(const std::string& key) {
    const json* node = find(key);
    if (node == nullptr) fail(key, "missing required object");
    return sub(key, *node);
  }

  std::optional<Reader> optional_object(const std::string& key) {
    const json* node = find(key);
    if (node == nullptr) return std::nullopt;
    return sub(key, *node);
  }

  double number(const std::string& key, double fallback) {
    const json* node = find(key);
    if (node == nullptr) return fallback;
    if (!node->is_number()) fail(key, "expected a number");
    return node->get<double>();
  }

  std::optional<double> optional_number(const std::string& key) {
    const json* node = find(key);
    if (node == nullptr) return std::nullopt;
    if (!node->is_number()) fail(key, "expected a number");
    return node->get<double>();
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    const json* node = find(key);
    if (node == nullptr) return fallback;
    if (!node->is_number_unsigned() && !(node->is_number_integer() && node->get<std::int64_t>() >= 0)) {
      fail(key, "expected a non-negative integer");
    }
    return node->get<std::uint64_t>();
  }

  std::optional<std::uint64_t> optional_count(const std::string& key) {
    if (node_.find(key) == node_.end() || node_.at(key).is_null()) {
      used_.insert(key);
      return std::nullopt;
    }
    return count(key, 0);
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* node = find(key);
    if (node == nullptr) return fallback;
    if (!node->is_boolean()) fail(key, "expected true or false");
    return node->get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const json* node = find(key);
    if (node == nullptr) return fallback;
    if (!node->is_string()) fail(key, "expected a string");
    return node->get<std::string>();
  }

  std::string choice(const std::string& key, const std::string& fallback,
                     const std::vector<std::string>& allowed) {
    const std::string value = string(key, fallback);
    if (std::find(allowed.begin(), allowed.end(), value) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(key, "'" + value + "' is not one of: " + list);
    }
    return value;
  }

  // A number (broadcast to length 1) or an array of numbers.
  std::optional<Vector> vector(const std::string& key) {
    const json* node = find(key);
    if (node == nullptr) return std::nullopt;
    if (node->is_number()) return Vector::Constant(1, node->get<double>());
    if (!node->is_array() || node->empty()) fail(key, "expected a number or a nonempty array of numbers");
    Vector out(static_cast<Eigen::Index>(node->size()));
    for (std::size_t i = 0; i < node->size(); ++i) {
      if (!(*node)[i].is_number()) fail(key, "array entries must be numbers");
      out[static_cast<Eigen::Index>(i)] = (*node)[i].get<double>();
    }
    return out;
  }

  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) {
    const auto v = vector(key);
    if (!v) return fallback;
    return {v->data(), v->data() + v->size()};
  }

  std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& fallback) {
    const json* node = find(key);
    if (node == nullptr) return fallback;
    if (!node->is_array()) fail(key, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& item : *node) {
      if (!item.is_string()) fail(key, "expected an array of strings");
      out.push_back(item.get<std::string>());
    }
    return out;
  }

  // Rejects keys that were never asked for.
  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (used_.count(key) == 0) fail(key, "unknown key");
    }
  }

 private:
  Reader sub(const std::string& key, const json& node) {
    auto path = path_;
    path.push_back(key);
    if (!node.is_object()) fail(key, "expected an object");
    return Reader(node, std::move(path), locator_);
  }

  const json& node_;
  std::vector<std::string> path_;
  const Locator& locator_;
  std::set<std::string> used_;
};

void check(Reader& reader, bool ok, const std::string& key, const std::string& message) {
  if (!ok) reader.fail(key, message);
}

DataConfig parse_data(Reader r, ModelConfig::Kind kind) {
  DataConfig d;
  const std::string fallback = kind == ModelConfig::Kind::kToyHM ? "generate" : "mixture";
  const std::string source = r.choice("source", fallback, {"generate", "file", "mixture"});
  d.source = source == "generate" ? DataConfig::Source::kGenerate
             : source == "file"   ? DataConfig::Source::kFile
                                  : DataConfig::Source::kMixture;
  d.path = r.string("path", "");
  check(r, d.source != DataConfig::Source::kFile || !d.path.empty(), "path",
        "a file source needs a path");
  d.n = r.count("n", d.n);
  check(r, d.n >= 1, "n", "must be at least 1");
  d.theta = r.number("theta", d.theta);
  d.sigma = r.number("sigma", d.sigma);
  check(r, d.sigma >= 0.0, "sigma", "must be non-negative");
  d.means = r.numbers("means", d.means);
  d.variance = r.number("variance", d.variance);
  check(r, d.variance > 0.0, "variance", "must be positive");
  d.seed = r.optional_count("seed");
  d.center_to = r.optional_number("center_to");
  r.finish();
  return d;
}

ModelConfig parse_model(Reader r) {
  ModelConfig m;
  const std::string name = r.choice("name", "toyhm", {"toyhm", "tiny_decoder"});
  m.kind = name == "toyhm" ? ModelConfig::Kind::kToyHM : ModelConfig::Kind::kTinyDecoder;
  m.sigma2 = r.number("sigma2", m.kind == ModelConfig::Kind::kToyHM ? 1.0 : 0.01);
  check(r, m.sigma2 > 0.0, "sigma2", "must be positive");
  if (m.kind == ModelConfig::Kind::kTinyDecoder) {
    m.decoder.sigma2 = m.sigma2;
    m.decoder.latent_per_datum = r.count("latent_per_datum", m.decoder.latent_per_datum);
    check(r, m.decoder.latent_per_datum >= 1, "latent_per_datum", "must be at least 1");
    m.decoder.hidden = r.count("hidden", m.decoder.hidden);
    check(r, m.decoder.hidden >= 1, "hidden", "must be at least 1");
    m.decoder.output = r.choice("output", "identity", {"identity", "tanh"}) == "identity"
                           ? OutputActivation::kIdentity
                           : OutputActivation::kTanh;
  }
  if (auto data = r.optional_object("data")) {
    m.data = parse_data(std::move(*data), m.kind);
  } else {
    m.data.source = m.kind == ModelConfig::Kind::kToyHM ? DataConfig::Source::kGenerate
                                                        : DataConfig::Source::kMixture;
  }
  r.finish();
  return m;
}

void parse_algorithm(Reader r, ExperimentConfig& c) {
  const std::string name = r.choice("name", "mpd", {"pgd", "mpd", "mpd_nc"});
  if (name == "pgd") c.variant = VariantConfig::pgd();
  if (name == "mpd") c.variant = VariantConfig::mpd();
  if (name == "mpd_nc") c.variant = VariantConfig::mpd_nc();
  c.variant.enrich_theta = r.boolean("enrich_theta", c.variant.enrich_theta);
  c.variant.enrich_x = r.boolean("enrich_x", c.variant.enrich_x);
  const std::string correction =
      r.choice("correction", to_string(c.variant.correction), {"none", "theta_only", "full"});
  c.variant.correction = correction == "none"         ? GradientCorrection::kNone
                         : correction == "theta_only" ? GradientCorrection::kThetaOnly
                                                      : GradientCorrection::kFull;
  c.nc_mu = r.optional_number("mu");
  check(r, !c.nc_mu || c.variant.algorithm == Algorithm::kMPDNC, "mu", "only MPD-NC takes mu");
  try {
    c.variant.validate();
  } catch (const ContractViolation& e) {
    r.fail("", e.what());
  }
  r.finish();
}

void parse_params(Reader r, ExperimentConfig& c) {
  auto& p = c.params;
  p.h_theta = r.number("h_theta", p.h_theta);
  p.h_x = r.number("h_x", p.h_x);
  check(r, p.h_theta > 0.0, "h_theta", "must be positive");
  check(r, p.h_x > 0.0, "h_x", "must be positive");
  p.gamma_theta = r.number("gamma_theta", p.gamma_theta);
  p.gamma_x = r.number("gamma_x", p.gamma_x);
  check(r, p.gamma_theta >= 0.0, "gamma_theta", "must be non-negative");
  check(r, p.gamma_x >= 0.0, "gamma_x", "must be non-negative");
  // eta may be given directly or through the momentum-coefficient heuristic.
  const auto eta_theta = r.optional_number("eta_theta");
  const auto mu_theta = r.optional_number("mu_theta");
  const auto eta_x = r.optional_number("eta_x");
  const auto mu_x = r.optional_number("mu_x");
  check(r, !(eta_theta && mu_theta), "mu_theta", "give eta_theta or mu_theta, not both");
  check(r, !(eta_x && mu_x), "mu_x", "give eta_x or mu_x, not both");
  try {
    if (eta_theta) p.eta_theta = *eta_theta;
    if (mu_theta) p.eta_theta = eta_from_mu(*mu_theta, p.gamma_theta, p.h_theta);
  } catch (const ContractViolation& e) {
    r.fail("mu_theta", e.what());
  }
  try {
    if (eta_x) p.eta_x = *eta_x;
    if (mu_x) p.eta_x = eta_from_mu(*mu_x, p.gamma_x, p.h_x);
  } catch (const ContractViolation& e) {
    r.fail("mu_x", e.what());
  }
  check(r, p.eta_theta >= 0.0, "eta_theta", "must be non-negative");
  check(r, p.eta_x >= 0.0, "eta_x", "must be non-negative");
  r.finish();
}

void parse_init(Reader r, InitConfig& init) {
  init.theta0 = r.vector("theta0");
  if (auto cloud = r.optional_object("cloud")) {
    init.cloud = cloud->choice("kind", "gaussian", {"gaussian", "point_mass"}) == "gaussian"
                     ? CloudInit::Kind::kGaussian
                     : CloudInit::Kind::kPointMass;
    if (auto mean = cloud->vector("mean")) init.cloud_mean = *mean;
    init.cloud_stddev = cloud->number("stddev", init.cloud_stddev);
    check(*cloud, init.cloud_stddev >= 0.0, "stddev", "must be non-negative");
    cloud->finish();
  }
  init.stationary_momentum = r.choice("momentum", "zero", {"zero", "stationary"}) == "stationary";
  r.finish();
}

ExperimentConfig parse_root(const json& root, const Locator& locator) {
  Reader r(root, {}, locator);
  ExperimentConfig c;
  if (auto model = r.optional_object("model")) c.model = parse_model(std::move(*model));
  if (auto algorithm = r.optional_object("algorithm")) parse_algorithm(std::move(*algorithm), c);
  if (auto params = r.optional_object("params")) parse_params(std::move(*params), c);
  if (c.variant.algorithm != Algorithm::kPGD) {
    if (c.variant.enrich_theta) {
      check(r, c.params.gamma_theta * c.params.eta_theta > 0.0, "params",
            "gamma_theta * eta_theta must be positive when theta is enriched");
    }
    if (c.variant.enrich_x) {
      check(r, c.params.gamma_x * c.params.eta_x > 0.0, "params",
            "gamma_x * eta_x must be positive when x is enriched");
    }
  }
  if (c.variant.algorithm == Algorithm::kMPDNC) {
    const double mu = c.effective_nc_mu();
    check(r, mu >= 0.0 && mu < 1.0, "algorithm", "MPD-NC momentum coefficient must lie in [0, 1)");
  }
  c.particles = r.count("particles", c.particles);
  check(r, c.particles >= 1, "particles", "must be at least 1");
  c.iterations = r.count("iterations", c.iterations);
  c.record_every = r.count("record_every", c.record_every);
  check(r, c.record_every >= 1, "record_every", "must be at least 1");
  if (auto init = r.optional_object("init")) parse_init(std::move(*init), c.init);
  if (auto sub = r.optional_object("subsampling")) {
    SubsampleConfig s;
    s.batch = sub->count("batch", s.batch);
    check(*sub, s.batch >= 1, "batch", "must be at least 1");
    s.catch_up = sub->choice("catch_up", "single", {"single", "repeated"}) == "single"
                     ? CatchUpMode::kSingle
                     : CatchUpMode::kRepeated;
    sub->finish();
    c.subsampling = s;
  }
  if (auto pre = r.optional_object("preconditioner")) {
    PreconditionerConfig p;
    p.beta = pre->number("beta", p.beta);
    check(*pre, p.beta > 0.0 && p.beta < 1.0, "beta", "must lie in (0, 1)");
    p.eps = pre->number("eps", p.eps);
    check(*pre, p.eps > 0.0, "eps", "must be positive");
    pre->finish();
    c.preconditioner = p;
  }
  c.metrics = r.strings("metrics", c.metrics);
  std::set<std::string> seen;
  for (const auto& m : c.metrics) {
    check(r, std::find(kMetricNames.begin(), kMetricNames.end(), m) != kMetricNames.end(), "metrics",
          "unknown metric '" + m + "' (known: param_error, nll, loss, w1)");
    check(r, seen.insert(m).second, "metrics", "duplicate metric '" + m + "'");
    const bool toy = c.model.kind == ModelConfig::Kind::kToyHM;
    check(r, toy || (m != "param_error" && m != "nll"), "metrics",
          "metric '" + m + "' needs the toyhm model");
    check(r, !toy || m != "w1", "metrics", "metric 'w1' needs the tiny_decoder model");
  }
  c.w1_samples = r.count("w1_samples", c.w1_samples);
  check(r, c.w1_samples >= 1, "w1_samples", "must be at least 1");
  c.theta_columns = r.count("theta_columns", c.theta_columns);
  c.divergence_bound = r.number("divergence_bound", c.divergence_bound);
  check(r, c.divergence_bound > 0.0, "divergence_bound", "must be positive");
  c.seed = r.count("seed", c.seed);
  const auto threads = r.count("threads", static_cast<std::uint64_t>(c.threads));
  check(r, threads >= 1 && threads <= 1024, "threads", "must lie in [1, 1024]");
  c.threads = static_cast<int>(threads);
  c.trace_wallclock = r.boolean("trace_wallclock", c.trace_wallclock);
  if (auto sw = r.optional_object("sweep")) {
    SweepConfig s;
    s.gammas = sw->numbers("gamma", {});
    s.etas = sw->numbers("eta", {});
    check(*sw, !s.gammas.empty(), "gamma", "grid must be nonempty");
    check(*sw, !s.etas.empty(), "eta", "grid must be nonempty");
    for (double g : s.gammas) check(*sw, g > 0.0, "gamma", "grid values must be positive");
    for (double e : s.etas) check(*sw, e > 0.0, "eta", "grid values must be positive");
    s.metric = sw->string("metric", s.metric);
    check(*sw, std::find(c.metrics.begin(), c.metrics.end(), s.metric) != c.metrics.end(), "metric",
          "sweep metric must be one of the recorded metrics");
    sw->finish();
    c.sweep = s;
  }
  r.finish();
  return c;
}

// ---------------------------------------------------------------- serialization

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json config_json(const ExperimentConfig& c) {
  json j;
  json model;
  const bool toy = c.model.kind == ModelConfig::Kind::kToyHM;
  model["name"] = toy ? "toyhm" : "tiny_decoder";
  model["sigma2"] = c.model.sigma2;
  if (!toy) {
    model["latent_per_datum"] = c.model.decoder.latent_per_datum;
    model["hidden"] = c.model.decoder.hidden;
    model["output"] = c.model.decoder.output == OutputActivation::kIdentity ? "identity" : "tanh";
  }
  const auto& d = c.model.data;
  json data;
  switch (d.source) {
    case DataConfig::Source::kGenerate:
      data["source"] = "generate";
      data["n"] = d.n;
      data["theta"] = d.theta;
      data["sigma"] = d.sigma;
      break;
    case DataConfig::Source::kFile:
      data["source"] = "file";
      data["path"] = d.path;
      break;
    case DataConfig::Source::kMixture:
      data["source"] = "mixture";
      data["n"] = d.n;
      data["means"] = d.means;
      data["variance"] = d.variance;
      break;
  }
  if (d.seed) data["seed"] = *d.seed;
  if (d.center_to) data["center_to"] = *d.center_to;
  model["data"] = data;
  j["model"] = model;

  json algorithm;
  algorithm["name"] = to_string(c.variant.algorithm);
  algorithm["enrich_theta"] = c.variant.enrich_theta;
  algorithm["enrich_x"] = c.variant.enrich_x;
  algorithm["correction"] = to_string(c.variant.correction);
  if (c.nc_mu) algorithm["mu"] = *c.nc_mu;
  j["algorithm"] = algorithm;

  j["params"] = {{"gamma_theta", c.params.gamma_theta}, {"eta_theta", c.params.eta_theta},
                 {"gamma_x", c.params.gamma_x},         {"eta_x", c.params.eta_x},
                 {"h_theta", c.params.h_theta},         {"h_x", c.params.h_x}};
  j["particles"] = c.particles;
  j["iterations"] = c.iterations;
  j["record_every"] = c.record_every;

  json init;
  if (c.init.theta0) init["theta0"] = vector_json(*c.init.theta0);
  init["cloud"] = {{"kind", c.init.cloud == CloudInit::Kind::kGaussian ? "gaussian" : "point_mass"},
                   {"mean", vector_json(c.init.cloud_mean)},
                   {"stddev", c.init.cloud_stddev}};
  init["momentum"] = c.init.stationary_momentum ? "stationary" : "zero";
  j["init"] = init;

  if (c.subsampling) {
    j["subsampling"] = {{"batch", c.subsampling->batch},
                        {"catch_up", c.subsampling->catch_up == CatchUpMode::kSingle ? "single" : "repeated"}};
  }
  if (c.preconditioner) {
    j["preconditioner"] = {{"beta", c.preconditioner->beta}, {"eps", c.preconditioner->eps}};
  }
  j["metrics"] = c.metrics;
  j["w1_samples"] = c.w1_samples;
  j["theta_columns"] = c.theta_columns;
  j["divergence_bound"] = c.divergence_bound;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["trace_wallclock"] = c.trace_wallclock;
  if (c.sweep) {
    j["sweep"] = {{"gamma", c.sweep->gammas}, {"eta", c.sweep->etas}, {"metric", c.sweep->metric}};
  }
  return j;
}

// ---------------------------------------------------------------- presets

ExperimentConfig toyhm_base() {
  ExperimentConfig c;
  c.model.kind = ModelConfig::Kind::kToyHM;
  c.model.sigma2 = 1.0;
  c.model.data.source = DataConfig::Source::kGenerate;
  c.model.data.n = 100;
  c.model.data.theta = 100.0;
  c.model.data.sigma = 1.0;
  c.params = MomentumParams{0.7, 403.96, 0.7, 403.96, 1e-4, 1e-2};
  c.particles = 100;
  c.iterations = 10000;
  c.record_every = 10;
  c.init.theta0 = Vector::Zero(1);
  c.metrics = {"param_error", "nll"};
  return c;
}

ExperimentConfig regime(double gamma) {
  ExperimentConfig c = toyhm_base();
  c.params.gamma_theta = gamma;
  c.params.gamma_x = gamma;
  return c;
}

ExperimentConfig integrators_preset() {
  ExperimentConfig c = toyhm_base();
  c.variant = VariantConfig::mpd_nc();
  c.params.h_theta = std::pow(10.0, -2.5);
  c.params.h_x = 1e-3;
  c.params.gamma_theta = 0.5;
  c.params.gamma_x = 0.5;
  c.params.eta_theta = eta_from_mu(0.9, c.params.gamma_theta, c.params.h_theta);
  c.params.eta_x = eta_from_mu(0.9, c.params.gamma_x, c.params.h_x);
  c.nc_mu = 0.9;
  c.iterations = 2000;
  c.record_every = 1;
  return c;
}

ExperimentConfig correction_preset() {
  ExperimentConfig c = toyhm_base();
  // h_theta sits on the stability edge of the uncorrected scheme.
  c.params = MomentumParams{0.293, 403.96, 0.293, 403.96, 6.75e-3, 1e-3};
  c.iterations = 10000;
  return c;
}

ExperimentConfig enrichment_preset() {
  ExperimentConfig c = toyhm_base();
  c.model.sigma2 = 144.0;
  c.model.data.theta = 10.0;
  c.model.data.sigma = 12.0;
  c.model.data.center_to = 10.0;
  c.init.cloud_mean = Vector::Constant(1, -5.0);
  return c;
}

ExperimentConfig mog_preset() {
  ExperimentConfig c;
  c.model.kind = ModelConfig::Kind::kTinyDecoder;
  c.model.sigma2 = 0.01;
  c.model.decoder = TinyDecoderShape{10, 32, 0.01, OutputActivation::kIdentity};
  c.model.data.source = DataConfig::Source::kMixture;
  c.model.data.n = 100;
  c.model.data.means = {2.0, -2.0};
  c.model.data.variance = 0.5;
  c.params.gamma_theta = 0.4;
  c.params.gamma_x = 0.4;
  c.params.h_theta = 1e-4;
  c.params.h_x = 1e-3;
  c.params.eta_theta = eta_from_mu(0.1, c.params.gamma_theta, c.params.h_theta);
  c.params.eta_x = eta_from_mu(0.1, c.params.gamma_x, c.params.h_x);
  c.preconditioner = PreconditionerConfig{0.9, 1e-8};
  c.particles = 5;
  c.iterations = 20000;
  c.record_every = 200;
  c.metrics = {"w1", "loss"};
  return c;
}

ExperimentConfig abc_sweep_preset() {
  ExperimentConfig c = toyhm_base();
  c.iterations = 2000;
  c.record_every = 10;
  c.metrics = {"param_error"};
  c.sweep = SweepConfig{{0.1, 0.3, 0.7, 1.0, 2.0}, {1.0, 10.0, 100.0, 403.96, 1000.0}, "param_error"};
  return c;
}

// ---------------------------------------------------------------- running

Vector mixture_generate(const DataConfig& d, std::uint64_t seed) {
  require(!d.means.empty(), "mixture: need at least one component");
  NormalStream normals(RngSpec{seed, 0, 0, RngDomain::kData});
  Vector y(static_cast<Eigen::Index>(d.n));
  const double sd = std::sqrt(d.variance);
  const auto k = d.means.size();
  for (auto& yi : y) {
    const auto which = std::min(k - 1, static_cast<std::size_t>(normals.next_uniform() * static_cast<double>(k)));
    yi = d.means[which] + sd * normals.next();
  }
  return y;
}

bool finite_and_bounded(const Vector& theta, double bound) {
  return theta.allFinite() && theta.cwiseAbs().maxCoeff() <= bound;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto pos = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos > 0 ? pos - 1 : 0), '\n');
    throw ConfigError("config:" + std::to_string(line) + ": invalid JSON: " + e.what());
  }
  const Locator locator(text);
  return parse_root(root, locator);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string config_to_json(const ExperimentConfig& config) { return config_json(config).dump(2); }

std::vector<std::string> preset_names() {
  return {"fig1a-underdamped", "fig1a-overdamped", "fig1a-critical", "fig1b-integrators",
          "fig1c-correction",  "fig2-enrichment",  "mog-density",    "abc-sweep"};
}

ExperimentConfig preset(const std::string& name) {
  if (name == "fig1a-underdamped") return regime(0.1);
  if (name == "fig1a-overdamped") return regime(1.0);
  if (name == "fig1a-critical") return regime(0.7);
  if (name == "fig1b-integrators") return integrators_preset();
  if (name == "fig1c-correction") return correction_preset();
  if (name == "fig2-enrichment") return enrichment_preset();
  if (name == "mog-density") return mog_preset();
  if (name == "abc-sweep") return abc_sweep_preset();
  throw ConfigError("unknown preset '" + name + "'");
}

ExperimentConfig as_pgd(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.variant = VariantConfig::pgd();
  c.nc_mu.reset();
  c.sweep.reset();
  return c;
}

Vector load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("dataset: cannot open " + path.string());
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    try {
      std::size_t used = 0;
      values.push_back(std::stod(line.substr(first), &used));
      const auto rest = line.substr(first + used).find_first_not_of(" \t\r");
      if (rest != std::string::npos) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw ConfigError("dataset:" + std::to_string(line_no) + ": expected one number per line");
    }
  }
  if (values.empty()) throw ConfigError("dataset: " + path.string() + " contains no values");
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Vector build_dataset(const ExperimentConfig& config) {
  const auto& d = config.model.data;
  const std::uint64_t seed = d.seed.value_or(config.seed);
  Vector y;
  switch (d.source) {
    case DataConfig::Source::kGenerate: y = toyhm_generate(d.n, d.theta, d.sigma, seed); break;
    case DataConfig::Source::kFile: y = load_dataset(d.path); break;
    case DataConfig::Source::kMixture: y = mixture_generate(d, seed); break;
  }
  if (d.center_to) y = center_to_mean(y, *d.center_to);
  return y;
}

std::unique_ptr<LatentModel> build_model(const ExperimentConfig& config) {
  Vector y = build_dataset(config);
  if (config.model.kind == ModelConfig::Kind::kToyHM) {
    return std::make_unique<ToyHM>(std::move(y), config.model.sigma2);
  }
  TinyDecoderShape shape = config.model.decoder;
  shape.sigma2 = config.model.sigma2;
  return std::make_unique<TinyDecoderModel>(std::move(y), shape);
}

RunResult run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const auto model = build_model(config);
  const auto* toy = dynamic_cast<const ToyHM*>(model.get());
  const auto* decoder = dynamic_cast<const TinyDecoderModel*>(model.get());

  Vector theta0;
  if (config.init.theta0) {
    theta0 = *config.init.theta0;
    if (theta0.size() == 1 && model->theta_dim() > 1) theta0 = Vector::Constant(static_cast<Eigen::Index>(model->theta_dim()), theta0[0]);
  } else if (decoder != nullptr) {
    theta0 = decoder->initial_theta(config.seed);
  } else {
    theta0 = Vector::Zero(static_cast<Eigen::Index>(model->theta_dim()));
  }
  if (static_cast<std::size_t>(theta0.size()) != model->theta_dim()) {
    throw ConfigError("config: init.theta0: expected " + std::to_string(model->theta_dim()) + " values");
  }
  CloudInit cloud_init;
  cloud_init.kind = config.init.cloud;
  cloud_init.mean = config.init.cloud_mean;
  cloud_init.stddev = config.init.cloud_stddev;
  if (config.init.stationary_momentum) cloud_init.momentum_precision = config.params.eta_x;
  if (cloud_init.mean.size() != 1 && static_cast<std::size_t>(cloud_init.mean.size()) != model->latent_dim()) {
    throw ConfigError("config: init.cloud.mean: expected 1 or " + std::to_string(model->latent_dim()) + " values");
  }

  auto [state, cloud] = init_state(*model, config.particles, theta0, cloud_init, config.seed);
  std::optional<RmsPropState> rms;
  if (config.preconditioner) {
    rms = RmsPropState::zeros(theta0.size(), config.preconditioner->beta, config.preconditioner->eps);
  }
  std::optional<SubsampleSchedule> schedule;
  if (config.subsampling) {
    schedule = SubsampleSchedule{config.subsampling->batch, model->num_blocks()};
    if (!model->factorizes() || config.subsampling->batch > model->num_blocks()) {
      throw ConfigError("config: subsampling.batch: must lie in [1, " + std::to_string(model->num_blocks()) + "]");
    }
  }
  const double theta_star = toy != nullptr ? toyhm_mle(toy->data()) : 0.0;

  RunResult result;
  result.metric_names = config.metrics;
  auto record = [&](std::uint64_t iteration) {
    RunRecord row;
    row.iteration = iteration;
    if (config.trace_wallclock) {
      row.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    row.theta = state.theta;
    for (const auto& name : config.metrics) {
      double value = 0.0;
      if (name == "param_error") {
        value = param_error(state.theta[0], theta_star);
      } else if (name == "nll") {
        value = -toy->log_marginal(state.theta[0]);
      } else if (name == "loss") {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < cloud.size(); ++i) sum += model->log_joint(state.theta, cloud.X.row(i).transpose());
        value = -sum / static_cast<double>(cloud.size());
      } else if (name == "w1") {
        const RngSpec rng{config.seed, 0, static_cast<std::uint32_t>(iteration), RngDomain::kMetric};
        value = empirical_w1(decoder->sample(state.theta, config.w1_samples, rng), decoder->data());
      }
      row.metrics.emplace_back(name, value);
    }
    result.trace.push_back(std::move(row));
  };

  record(0);
  const double nc_mu = config.effective_nc_mu();
  const SubsampleOptions sub_options{config.subsampling ? config.subsampling->catch_up : CatchUpMode::kSingle, nc_mu};
  RmsPropState* pre = rms ? &*rms : nullptr;
  for (std::uint64_t k = 1; k <= config.iterations; ++k) {
    const StepContext ctx{config.seed, k, config.threads, true};
    if (schedule) {
      subsampled_step(*model, state, cloud, config.params, config.variant, schedule->draw(config.seed, k), ctx,
                      sub_options, pre);
    } else {
      switch (config.variant.algorithm) {
        case Algorithm::kPGD:
          pgd_step(*model, state, cloud, config.params.h_theta, config.params.h_x, ctx, pre);
          break;
        case Algorithm::kMPDExp:
          mpd_step(*model, state, cloud, config.params, config.variant, ctx, pre);
          break;
        case Algorithm::kMPDNC:
          nc_step(*model, state, cloud, config.params, nc_mu, ctx);
          break;
      }
    }
    result.last_iteration = k;
    if (!finite_and_bounded(state.theta, config.divergence_bound)) {
      result.diverged = true;
      record(k);
      break;
    }
    if (k % config.record_every == 0 || k == config.iterations) record(k);
  }
  result.final_state = std::move(state);
  result.final_cloud = std::move(cloud);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string trace_csv(const ExperimentConfig& config, const RunResult& result) {
  std::ostringstream out;
  const auto columns = result.trace.empty()
                           ? std::size_t{0}
                           : std::min<std::size_t>(config.theta_columns, static_cast<std::size_t>(result.trace.front().theta.size()));
  out << "iteration,wallclock";
  for (std::size_t j = 0; j < columns; ++j) out << ",theta_" << j;
  for (const auto& name : result.metric_names) out << ',' << name;
  out << '\n';
  for (const auto& row : result.trace) {
    out << row.iteration << ',' << format_double(row.wallclock);
    for (std::size_t j = 0; j < columns; ++j) out << ',' << format_double(row.theta[static_cast<Eigen::Index>(j)]);
    for (const auto& [name, value] : row.metrics) out << ',' << format_double(value);
    out << '\n';
  }
  return out.str();
}

void write_trace_csv(const std::filesystem::path& path, const ExperimentConfig& config,
                     const RunResult& result) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + path.string());
  out << trace_csv(config, result);
}

std::string summary_json(const ExperimentConfig& config, const RunResult& result) {
  json j;
  j["seed"] = config.seed;
  j["iterations"] = result.last_iteration;
  j["diverged"] = result.diverged;
  json final_metrics = json::object();
  if (!result.trace.empty()) {
    for (const auto& [name, value] : result.trace.back().metrics) {
      final_metrics[name] = std::isfinite(value) ? json(value) : json(nullptr);
    }
  }
  j["final"] = final_metrics;
  if (static_cast<std::size_t>(result.final_state.theta.size()) <= config.theta_columns) {
    j["theta"] = vector_json(result.final_state.theta);
  }
  if (config.trace_wallclock) j["seconds"] = result.seconds;
  j["config"] = config_json(config);
  return j.dump(2);
}

std::vector<double> metric_curve(const RunResult& result, const std::string& metric) {
  std::vector<double> curve;
  for (const auto& row : result.trace) {
    if (row.iteration >= 1) curve.push_back(row.metric(metric));
  }
  if (curve.empty()) {
    for (const auto& row : result.trace) curve.push_back(row.metric(metric));
  }
  return curve;
}

CompareResult compare(const ExperimentConfig& baseline, const ExperimentConfig& candidate,
                      const std::string& metric) {
  if (config_json(baseline)["model"] != config_json(candidate)["model"]) {
    throw ConfigError("compare: the two configurations use different models or data");
  }
  if (baseline.iterations != candidate.iterations || baseline.record_every != candidate.record_every) {
    throw ConfigError("compare: iteration counts and record_every must agree");
  }
  if (baseline.seed != candidate.seed) throw ConfigError("compare: seeds must agree");
  for (const auto* c : {&baseline, &candidate}) {
    if (std::find(c->metrics.begin(), c->metrics.end(), metric) == c->metrics.end()) {
      throw ConfigError("compare: metric '" + metric + "' is not recorded by both configurations");
    }
  }
  CompareResult out;
  out.metric = metric;
  out.baseline = run_experiment(baseline);
  out.candidate = run_experiment(candidate);
  const auto a = metric_curve(out.baseline, metric);
  const auto b = metric_curve(out.candidate, metric);
  if (a.size() != b.size()) {
    // A diverged run stops early; score it as infinitely bad.
    const double inf = std::numeric_limits<double>::infinity();
    auto pad = [&](std::vector<double> v, std::size_t n) {
      v.resize(n, inf);
      return v;
    };
    const auto n = std::max(a.size(), b.size());
    out.abc = abc(pad(a, n), pad(b, n));
  } else {
    out.abc = abc(a, b);
  }
  return out;
}

SweepResult sweep(const ExperimentConfig& base, const SweepConfig& grid) {
  require(!grid.gammas.empty() && !grid.etas.empty(), "sweep: grids must be nonempty");
  ExperimentConfig baseline = as_pgd(base);
  baseline.threads = 1;
  const auto base_curve = metric_curve(run_experiment(baseline), grid.metric);

  SweepResult out;
  out.gammas = grid.gammas;
  out.etas = grid.etas;
  out.metric = grid.metric;
  out.abc.resize(static_cast<Eigen::Index>(grid.gammas.size()), static_cast<Eigen::Index>(grid.etas.size()));
  const auto cells = static_cast<std::int64_t>(grid.gammas.size() * grid.etas.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(base.threads)
  for (std::int64_t cell = 0; cell < cells; ++cell) {
    try {
      const auto gi = static_cast<std::size_t>(cell) / grid.etas.size();
      const auto ei = static_cast<std::size_t>(cell) % grid.etas.size();
      ExperimentConfig c = base;
      c.sweep.reset();
      c.threads = 1;
      if (c.variant.algorithm == Algorithm::kPGD) c.variant = VariantConfig::mpd();
      c.params.gamma_theta = c.params.gamma_x = grid.gammas[gi];
      c.params.eta_theta = c.params.eta_x = grid.etas[ei];
      auto curve = metric_curve(run_experiment(c), grid.metric);
      curve.resize(base_curve.size(), std::numeric_limits<double>::infinity());
      out.abc(static_cast<Eigen::Index>(gi), static_cast<Eigen::Index>(ei)) = abc(base_curve, curve);
    } catch (...) {
#pragma omp critical(mpd_sweep_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "gamma\\eta";
  for (double eta : result.etas) out << ',' << format_double(eta);
  out << '\n';
  for (std::size_t g = 0; g < result.gammas.size(); ++g) {
    out << format_double(result.gammas[g]);
    for (std::size_t e = 0; e < result.etas.size(); ++e) {
      out << ',' << format_double(result.abc(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(e)));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace mpd
