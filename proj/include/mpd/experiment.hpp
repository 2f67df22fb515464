#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpd/diagnostics.hpp"
#include "mpd/integrators.hpp"
#include "mpd/state.hpp"
#include "mpd/subsampling.hpp"
#include "mpd/tiny_decoder.hpp"

namespace mpd {

/// Invalid experiment configuration. The message starts with
/// "config:<line>:" when the offending key can be located in the source text.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DataConfig {
  enum class Source { kGenerate, kFile, kMixture };
  Source source = Source::kGenerate;
  std::string path;                    ///< kFile: one float per line
  std::size_t n = 100;                 ///< kGenerate, kMixture
  double theta = 100.0;                ///< kGenerate: generating parameter
  double sigma = 1.0;                  ///< kGenerate: generating prior scale
  std::vector<double> means{2.0, -2.0};  ///< kMixture: equal-weight component means
  double variance = 0.5;               ///< kMixture: shared component variance
  std::optional<std::uint64_t> seed;   ///< defaults to the run seed
  std::optional<double> center_to;     ///< shift the data to this empirical mean
};

struct ModelConfig {
  enum class Kind { kToyHM, kTinyDecoder };
  Kind kind = Kind::kToyHM;
  double sigma2 = 1.0;  ///< ToyHM prior variance, or decoder likelihood variance
  TinyDecoderShape decoder;
  DataConfig data;
};

struct InitConfig {
  std::optional<Vector> theta0;  ///< unset: 0 for ToyHM, the default initializer for the decoder
  CloudInit::Kind cloud = CloudInit::Kind::kGaussian;
  Vector cloud_mean = Vector::Zero(1);
  double cloud_stddev = 1.0;
  bool stationary_momentum = false;  ///< U_0 ~ N(0, I / eta_x) instead of 0
};

struct SubsampleConfig {
  std::size_t batch = 1;
  CatchUpMode catch_up = CatchUpMode::kSingle;
};

struct PreconditionerConfig {
  double beta = 0.9;
  double eps = 1e-8;
};

struct SweepConfig {
  std::vector<double> gammas;
  std::vector<double> etas;
  std::string metric = "param_error";
};

struct ExperimentConfig {
  ModelConfig model;
  VariantConfig variant;
  std::optional<double> nc_mu;  ///< MPD-NC momentum; defaults to 1 - h_theta gamma_theta eta_theta
  MomentumParams params;
  std::size_t particles = 100;
  std::uint64_t iterations = 10000;
  std::uint64_t record_every = 1;
  InitConfig init;
  std::optional<SubsampleConfig> subsampling;
  std::optional<PreconditionerConfig> preconditioner;
  std::vector<std::string> metrics{"param_error"};
  std::size_t w1_samples = 1000;
  std::size_t theta_columns = 8;
  double divergence_bound = 1e6;
  std::uint64_t seed = 0;
  int threads = 1;
  bool trace_wallclock = false;
  std::optional<SweepConfig> sweep;

  /// Momentum coefficient actually used by MPD-NC.
  double effective_nc_mu() const;
};

/// Parses and validates a JSON configuration. Unknown keys are rejected.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON form; parse_config(config_to_json(c)) reproduces c.
std::string config_to_json(const ExperimentConfig& config);

std::vector<std::string> preset_names();
/// Throws ConfigError for unknown names.
ExperimentConfig preset(const std::string& name);

/// The same experiment run with plain PGD at the same step sizes.
ExperimentConfig as_pgd(const ExperimentConfig& config);

/// Reads one float per line; blank lines are skipped.
Vector load_dataset(const std::filesystem::path& path);
/// The dataset a configuration describes, resolved against the run seed.
Vector build_dataset(const ExperimentConfig& config);
std::unique_ptr<LatentModel> build_model(const ExperimentConfig& config);

struct RunResult {
  std::vector<RunRecord> trace;
  std::vector<std::string> metric_names;
  ThetaState final_state;
  ParticleCloud final_cloud;
  bool diverged = false;
  std::uint64_t last_iteration = 0;
  double seconds = 0.0;
};

/// Runs the configured algorithm, recording iteration 0 and every
/// record_every-th iteration (and the last). Stops early, flagging
/// divergence, once theta is non-finite or exceeds the divergence bound.
RunResult run_experiment(const ExperimentConfig& config);

/// trace.csv: iteration, wallclock, theta_0.., then metrics in config order.
/// Doubles use 17 significant digits.
void write_trace_csv(const std::filesystem::path& path, const ExperimentConfig& config,
                     const RunResult& result);
std::string trace_csv(const ExperimentConfig& config, const RunResult& result);
/// summary.json: final metrics, divergence flag, seed and the config echo.
std::string summary_json(const ExperimentConfig& config, const RunResult& result);

/// Metric curve over recorded iterations k >= 1 (all rows if there are none).
std::vector<double> metric_curve(const RunResult& result, const std::string& metric);

struct CompareResult {
  RunResult baseline;
  RunResult candidate;
  std::string metric;
  double abc = 0.0;
};

/// Runs both configurations and scores candidate against baseline with ABC.
/// Throws ConfigError unless model, iteration grid and seed agree.
CompareResult compare(const ExperimentConfig& baseline, const ExperimentConfig& candidate,
                      const std::string& metric);

struct SweepResult {
  std::vector<double> gammas;
  std::vector<double> etas;
  Matrix abc;  ///< rows: gamma, columns: eta
  std::string metric;
};

/// ABC of MPD with gamma_theta = gamma_x = gamma and eta_theta = eta_x = eta
/// against the PGD baseline of `base`, for every grid cell.
SweepResult sweep(const ExperimentConfig& base, const SweepConfig& grid);
std::string sweep_csv(const SweepResult& result);

/// Formats a double with 17 significant digits.
std::string format_double(double value);

}  // namespace mpd
