#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "mpd/experiment.hpp"
#include "mpd/toy_hm.hpp"
#include "mpd/validate.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailure = 1;
constexpr int kUsageError = 2;

struct Common {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::uint64_t> iterations;
  std::string out = "out";
};

void add_common(CLI::App* cmd, Common& c, bool with_config) {
  if (with_config) {
    auto* config = cmd->add_option("--config", c.config, "experiment configuration (JSON)");
    auto* preset = cmd->add_option("--preset", c.preset, "built-in preset name (see `mpd preset`)");
    config->excludes(preset);
    cmd->add_option("--iterations", c.iterations, "override the iteration count");
  }
  cmd->add_option("--seed", c.seed, "override the seed");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::Range(1, 1024));
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
}

// A path to a config file, or a preset name.
mpd::ExperimentConfig resolve(const std::string& source) {
  if (std::filesystem::exists(source)) return mpd::load_config(source);
  const auto names = mpd::preset_names();
  if (std::find(names.begin(), names.end(), source) != names.end()) return mpd::preset(source);
  throw mpd::ConfigError("'" + source + "' is neither a readable config file nor a preset name");
}

void apply(const Common& c, mpd::ExperimentConfig& config) {
  if (c.seed) config.seed = *c.seed;
  if (c.threads) config.threads = *c.threads;
  if (c.iterations) config.iterations = *c.iterations;
}

mpd::ExperimentConfig load(const Common& c) {
  if (c.config.empty() && c.preset.empty()) throw mpd::ConfigError("one of --config or --preset is required");
  mpd::ExperimentConfig config = c.config.empty() ? mpd::preset(c.preset) : mpd::load_config(c.config);
  apply(c, config);
  return config;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::filesystem::path prepare(const std::string& dir) {
  std::filesystem::create_directories(dir);
  return dir;
}

int cmd_run(const Common& c) {
  const auto config = load(c);
  const auto dir = prepare(c.out);
  const auto result = mpd::run_experiment(config);
  mpd::write_trace_csv(dir / "trace.csv", config, result);
  write_file(dir / "summary.json", mpd::summary_json(config, result) + "\n");
  std::cout << "iterations " << result.last_iteration << (result.diverged ? " (diverged)" : "");
  for (const auto& [name, value] : result.trace.back().metrics) std::cout << ", " << name << " " << value;
  std::cout << "\nwrote " << (dir / "trace.csv").string() << " and " << (dir / "summary.json").string() << "\n";
  return kOk;
}

int cmd_compare(const Common& c, const std::string& a, const std::string& b, const std::string& metric) {
  mpd::ExperimentConfig candidate = resolve(a);
  apply(c, candidate);
  mpd::ExperimentConfig baseline;
  if (b.empty()) {
    baseline = mpd::as_pgd(candidate);
  } else {
    baseline = candidate;
    candidate = resolve(b);
    apply(c, candidate);
  }
  const std::string m = metric.empty() ? candidate.metrics.front() : metric;
  const auto dir = prepare(c.out);
  const auto result = mpd::compare(baseline, candidate, m);
  mpd::write_trace_csv(dir / "trace_baseline.csv", baseline, result.baseline);
  mpd::write_trace_csv(dir / "trace_candidate.csv", candidate, result.candidate);
  nlohmann::json j;
  j["metric"] = m;
  j["abc"] = result.abc;
  j["baseline"] = nlohmann::json::parse(mpd::summary_json(baseline, result.baseline));
  j["candidate"] = nlohmann::json::parse(mpd::summary_json(candidate, result.candidate));
  write_file(dir / "compare.json", j.dump(2) + "\n");
  std::cout << "ABC(" << m << ") = " << mpd::format_double(result.abc) << "\n";
  return kOk;
}

int cmd_sweep(const Common& c, const std::vector<double>& gammas, const std::vector<double>& etas,
              const std::string& metric) {
  auto config = load(c);
  mpd::SweepConfig grid = config.sweep.value_or(mpd::SweepConfig{{}, {}, config.metrics.front()});
  if (!gammas.empty()) grid.gammas = gammas;
  if (!etas.empty()) grid.etas = etas;
  if (!metric.empty()) grid.metric = metric;
  if (grid.gammas.empty() || grid.etas.empty()) {
    throw mpd::ConfigError("sweep needs nonempty gamma and eta grids (config 'sweep' or --gamma/--eta)");
  }
  if (std::find(config.metrics.begin(), config.metrics.end(), grid.metric) == config.metrics.end()) {
    throw mpd::ConfigError("sweep metric '" + grid.metric + "' is not recorded by the configuration");
  }
  const auto dir = prepare(c.out);
  const auto result = mpd::sweep(config, grid);
  write_file(dir / "abc.csv", mpd::sweep_csv(result));
  std::cout << mpd::sweep_csv(result) << "wrote " << (dir / "abc.csv").string() << "\n";
  return kOk;
}

int cmd_validate(const Common& c, const std::string& fault, const std::vector<std::string>& only) {
  mpd::ValidateOptions options;
  options.only = only;
  if (c.threads) options.threads = *c.threads;
  if (fault == "luu") options.l_uu_scale = 1.1;
  const auto dir = prepare(c.out);
  const auto report = mpd::run_validation(options);
  write_file(dir / "validate.json", report.to_json() + "\n");
  for (const auto& check : report.checks) {
    std::cout << (check.passed ? "PASS " : "FAIL ") << check.name << "  observed " << check.observed
              << ", bound " << check.expected;
    if (!check.passed) std::cout << "  (" << check.detail << ")";
    std::cout << "\n";
  }
  std::cout << (report.passed() ? "all checks passed" : "some checks FAILED") << "; wrote "
            << (dir / "validate.json").string() << "\n";
  return report.passed() ? kOk : kCheckFailure;
}

int cmd_mle(const std::string& dataset) {
  const auto y = mpd::load_dataset(dataset);
  std::cout << mpd::format_double(mpd::toyhm_mle(y)) << "\n";
  return kOk;
}

int cmd_preset(const std::string& name) {
  if (name.empty()) {
    for (const auto& n : mpd::preset_names()) std::cout << n << "\n";
  } else {
    std::cout << mpd::config_to_json(mpd::preset(name)) << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Momentum particle descent for latent-variable maximum likelihood"};
  app.require_subcommand(1);

  Common run_opts;
  auto* run = app.add_subcommand("run", "run one experiment; writes trace.csv and summary.json");
  add_common(run, run_opts, true);

  Common compare_opts;
  std::string cmp_a;
  std::string cmp_b;
  std::string cmp_metric;
  auto* cmp = app.add_subcommand("compare",
                                 "ABC of a candidate against a baseline; with one config, the baseline is "
                                 "PGD at the same step sizes");
  cmp->add_option("baseline_or_candidate", cmp_a, "config file or preset (the candidate if alone)")->required();
  cmp->add_option("candidate", cmp_b, "config file or preset");
  cmp->add_option("--metric", cmp_metric, "metric to score (default: first recorded metric)");
  add_common(cmp, compare_opts, false);
  cmp->add_option("--iterations", compare_opts.iterations, "override the iteration count");

  Common sweep_opts;
  std::vector<double> gammas;
  std::vector<double> etas;
  std::string sweep_metric;
  auto* sw = app.add_subcommand("sweep", "ABC over a (gamma, eta) grid; writes abc.csv");
  add_common(sw, sweep_opts, true);
  sw->add_option("--gamma", gammas, "gamma grid (overrides the config)");
  sw->add_option("--eta", etas, "eta grid (overrides the config)");
  sw->add_option("--metric", sweep_metric, "metric to score");

  Common validate_opts;
  std::string fault;
  auto* val = app.add_subcommand("validate", "run the oracle suite; writes validate.json");
  add_common(val, validate_opts, false);
  val->add_option("--inject-fault", fault, "corrupt a component to exercise the suite")
      ->check(CLI::IsMember({"luu"}));
  std::vector<std::string> only;
  val->add_option("--only", only, "run only the named checks");

  std::string dataset;
  auto* mle = app.add_subcommand("mle", "ToyHM marginal MLE (sample mean) of a dataset file");
  mle->add_option("dataset", dataset, "one float per line")->required();

  std::string preset_name;
  auto* pre = app.add_subcommand("preset", "list presets, or print one as JSON");
  pre->add_option("name", preset_name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*cmp) return cmd_compare(compare_opts, cmp_a, cmp_b, cmp_metric);
    if (*sw) return cmd_sweep(sweep_opts, gammas, etas, sweep_metric);
    if (*val) return cmd_validate(validate_opts, fault, only);
    if (*mle) return cmd_mle(dataset);
    if (*pre) return cmd_preset(preset_name);
  } catch (const mpd::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const mpd::ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailure;
  }
  return kUsageError;
}
