#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome cli(const std::string& args) {
  const std::string command = std::string("\"") + MPD_CLI_PATH + "\" " + args + " 2>&1";
  Outcome r;
  FILE* pipe = popen(command.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buffer{};
  std::size_t n = 0;
  while ((n = fread(buffer.data(), 1, buffer.size(), pipe)) > 0) r.out.append(buffer.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("mpd_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string out(const std::string& sub = "out") const { return "--out \"" + (dir_ / sub).string() + "\""; }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("run " + out()).code, 2);
  EXPECT_EQ(cli("run --preset fig1a-critical --threads 0 " + out()).code, 2);
  EXPECT_EQ(cli("run --preset nonexistent " + out()).code, 2);
  EXPECT_EQ(cli("validate --inject-fault bogus " + out()).code, 2);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST_F(Cli, BadConfigReportsLineAndExitsWithTwo) {
  const auto path = dir_ / "bad.json";
  std::ofstream(path) << "{\n  \"iterations\": 5,\n  \"particels\": 4\n}\n";
  const auto r = cli("run --config \"" + path.string() + "\" " + out());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("config:3:"), std::string::npos) << r.out;
}

TEST_F(Cli, RunWritesTraceAndSummary) {
  const auto path = dir_ / "small.json";
  std::ofstream(path) << R"({"model": {"data": {"n": 10}}, "particles": 4, "iterations": 50, "record_every": 10})";
  const auto r = cli("run --config \"" + path.string() + "\" --seed 3 " + out());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto csv = slurp(dir_ / "out" / "trace.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,wallclock,theta_0,param_error");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  const auto summary = nlohmann::json::parse(slurp(dir_ / "out" / "summary.json"));
  EXPECT_EQ(summary["seed"], 3);
  EXPECT_EQ(summary["diverged"], false);
  EXPECT_EQ(summary["config"]["iterations"], 50);
}

TEST_F(Cli, RunIsReproducibleAcrossThreadCounts) {
  const std::string args = "run --preset fig1a-critical --iterations 200 ";
  ASSERT_EQ(cli(args + "--threads 1 " + out("a")).code, 0);
  ASSERT_EQ(cli(args + "--threads 8 " + out("b")).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "trace.csv"), slurp(dir_ / "b" / "trace.csv"));
}

TEST_F(Cli, CompareAgainstImplicitPgd) {
  const auto r = cli("compare fig1a-critical --iterations 300 " + out());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("ABC(param_error) = "), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(dir_ / "out" / "compare.json"));
  EXPECT_GT(j["abc"].get<double>(), 0.0);
  EXPECT_EQ(j["baseline"]["config"]["algorithm"]["name"], "pgd");
  EXPECT_TRUE(fs::exists(dir_ / "out" / "trace_baseline.csv"));
  EXPECT_EQ(cli("compare fig1a-critical mog-density " + out()).code, 2);
}

TEST_F(Cli, SweepWritesGrid) {
  const auto r = cli("sweep --preset fig1a-critical --iterations 100 --gamma 0.5 0.7 --eta 400 " + out());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto csv = slurp(dir_ / "out" / "abc.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(cli("sweep --preset fig1a-critical " + out()).code, 2);
}

TEST_F(Cli, MleOfDatasetFile) {
  const auto path = dir_ / "y.txt";
  std::ofstream(path) << "1\n2\n\n6\n";
  const auto r = cli("mle \"" + path.string() + "\"");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "3\n");
  EXPECT_EQ(cli("mle \"" + (dir_ / "missing.txt").string() + "\"").code, 2);
}

TEST_F(Cli, PresetListingAndDump) {
  const auto list = cli("preset");
  EXPECT_EQ(list.code, 0);
  EXPECT_NE(list.out.find("fig1a-critical\n"), std::string::npos);
  EXPECT_NE(list.out.find("mog-density\n"), std::string::npos);
  const auto dump = cli("preset fig1c-correction");
  EXPECT_EQ(dump.code, 0);
  EXPECT_EQ(nlohmann::json::parse(dump.out)["params"]["h_theta"], 6.75e-3);
}

TEST_F(Cli, ValidateFailsUnderInjectedFault) {
  const auto r = cli("validate --inject-fault luu " + out());
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("FAIL transition_cholesky"), std::string::npos) << r.out;
  const auto report = nlohmann::json::parse(slurp(dir_ / "out" / "validate.json"));
  EXPECT_EQ(report["passed"], false);
}
