#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "support.hpp"

using namespace pvnowcast;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path log = fs::temp_directory_path() / ("pvnowcast_cli_" + std::to_string(counter++) + ".log");
  const std::string cmd = std::string("\"") + PVNOWCAST_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = read_file(log);
  fs::remove(log);
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

/// Runs the simulate -> synthesize -> train chain once for the whole suite.
class CliChain : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = scratch_dir("cli_chain");
    write_file(root_ / "tiny.json", to_json(tiny_config()).dump(2));
    const std::string cfg = " --config " + q(root_ / "tiny.json");
    ASSERT_EQ(run_cli("simulate --seed 3 --out " + q(root_ / "sim") + cfg).code, 0);
    ASSERT_EQ(run_cli("synthesize --seed 3 --kind training --scenarios 12 --pool " + q(pool()) + " --out " +
                      q(root_ / "syn") + cfg)
                  .code,
              0);
    ASSERT_EQ(run_cli("synthesize --seed 3 --kind testing --scenarios 2 --pool " + q(pool()) + " --out " +
                      q(root_ / "syn") + cfg)
                  .code,
              0);
    ASSERT_EQ(run_cli("train --seed 3 --data " + q(root_ / "syn" / "training_scenarios.csv") + " --out " +
                      q(root_ / "model") + cfg)
                  .code,
              0);
  }

  static fs::path pool() { return root_ / "sim" / "pool.csv"; }
  static fs::path model() { return root_ / "model" / "model.json"; }
  static fs::path tests_csv() { return root_ / "syn" / "test_scenarios.csv"; }
  static std::string cfg() { return " --config " + q(root_ / "tiny.json"); }

  static inline fs::path root_;
};

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("simulate --bogus 1 --out x").code, 2);
  EXPECT_EQ(run_cli("simulate").code, 2);
  EXPECT_EQ(run_cli("nowcast --model /nonexistent/model.json --input x --out y").code, 2);
}

TEST(Cli, HelpAndVersionExitZero) {
  const auto help = run_cli("--help");
  EXPECT_EQ(help.code, 0);
  for (const char* cmd : {"simulate", "correlate", "synthesize", "train", "nowcast", "evaluate", "report"})
    EXPECT_NE(help.output.find(cmd), std::string::npos) << cmd;
  const auto v = run_cli("--version");
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.output.find(kVersion), std::string::npos);
}

TEST(Cli, EvaluateWithoutCaseIsAnError) {
  const auto dir = scratch_dir("cli_eval_nocase");
  const auto r = run_cli("evaluate --out " + q(dir));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("pvnowcast: error:"), std::string::npos) << r.output;
}

TEST(Cli, DefaultPoolThirdHarmonicCorrelation) {
  const auto dir = scratch_dir("cli_correlate");
  ASSERT_EQ(run_cli("simulate --seed 1 --out " + q(dir)).code, 0);
  const auto r = run_cli("correlate --seed 1 --stride 600 --pool " + q(dir / "pool.csv") + " --out " + q(dir));
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream in(read_file(dir / "correlation.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "order,pearson_r,n");
  std::map<int, double> table;
  while (std::getline(in, line)) {
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    table[std::stoi(line.substr(0, c1))] = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
  }
  ASSERT_TRUE(table.contains(3));
  EXPECT_GE(table[3], 0.95);
  EXPECT_EQ(table.size(), 23u);
}

TEST(Cli, WaveformPathCorrelates) {
  const auto dir = scratch_dir("cli_waveform");
  write_file(dir / "tiny.json", to_json(tiny_config()).dump(2));
  const auto sim = run_cli("simulate --seed 4 --days 2 --waveform-day d01 --waveform-start 43000 --waveform-seconds 40 "
                           "--config " + q(dir / "tiny.json") + " --out " + q(dir));
  ASSERT_EQ(sim.code, 0) << sim.output;
  ASSERT_TRUE(fs::exists(dir / "waveform.csv.json"));
  const auto r = run_cli("correlate --pool " + q(dir / "pool.csv") + " --waveform " + q(dir / "waveform.csv") +
                         " --day d01 --out " + q(dir));
  ASSERT_EQ(r.code, 0) << r.output;
  const std::string table = read_file(dir / "correlation.csv");
  EXPECT_EQ(table.rfind("order,pearson_r,n\n", 0), 0u);
  EXPECT_NE(table.find("\n3,"), std::string::npos);
  EXPECT_NE(table.find(",40\n"), std::string::npos);
  const auto bad = run_cli("correlate --pool " + q(dir / "pool.csv") + " --waveform " + q(dir / "waveform.csv") +
                           " --day d09 --out " + q(dir));
  EXPECT_EQ(bad.code, 1);
}

TEST_F(CliChain, ChainArtifactsExistWithManifests) {
  for (const auto& f : {pool(), tests_csv(), model(), root_ / "syn" / "training_scenarios.csv",
                        root_ / "model" / "training_log.csv"})
    EXPECT_TRUE(fs::exists(f)) << f;
  const auto m = nlohmann::json::parse(read_file(root_ / "model" / "manifest.json"));
  EXPECT_EQ(m.at("command").get<std::string>(), "train");
  EXPECT_EQ(m.at("outputs").at("model.json").get<std::string>(), sha256_file(model().string()));
  EXPECT_EQ(load_dataset(tests_csv().string()).scenario_id.back(), 2);
  EXPECT_EQ(load_model(model().string()).hidden(), 16);
}

TEST_F(CliChain, SimulateIsReproducible) {
  const auto dir = scratch_dir("cli_sim_again");
  ASSERT_EQ(run_cli("simulate --seed 3 --out " + q(dir) + cfg()).code, 0);
  EXPECT_EQ(read_file(dir / "pool.csv"), read_file(pool()));
}

TEST_F(CliChain, NowcastMatchesLibraryForward) {
  const auto dir = scratch_dir("cli_nowcast");
  const auto r = run_cli("nowcast --model " + q(model()) + " --input " + q(tests_csv()) + " --out " + q(dir));
  ASSERT_EQ(r.code, 0) << r.output;
  const MlpModel m = load_model(model().string());
  const Dataset d = load_dataset(tests_csv().string());
  std::istringstream in(read_file(dir / "nowcast.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "scenario_id,t,nowcast_kw");
  std::size_t i = 0;
  while (std::getline(in, line)) {
    ASSERT_LT(i, d.rows());
    const double got = std::stod(line.substr(line.rfind(',') + 1));
    EXPECT_EQ(got, forward(m, {d.temperature[i], d.irradiance[i], d.h3_feature[i]}));
    ++i;
  }
  EXPECT_EQ(i, d.rows());
}

TEST_F(CliChain, NowcastOnEmptyInputFails) {
  const auto dir = scratch_dir("cli_nowcast_empty");
  write_file(dir / "empty.csv", "scenario_id,t,temperature_c,irradiance_wm2,h3_feature_a\n");
  const auto r = run_cli("nowcast --model " + q(model()) + " --input " + q(dir / "empty.csv") + " --out " + q(dir));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("no data rows to nowcast"), std::string::npos) << r.output;
}

TEST_F(CliChain, ReportWritesAllFiles) {
  const auto dir = scratch_dir("cli_report");
  const auto r = run_cli("report --model " + q(model()) + " --data " + q(tests_csv()) +
                         " --capacity 97.1 --scenario 2 --out " + q(dir));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir / "nowcast_2.svg"));
  EXPECT_TRUE(fs::exists(dir / "residuals.csv"));
  const auto j = nlohmann::json::parse(read_file(dir / "metrics.json"));
  EXPECT_DOUBLE_EQ(j.at("capacity_kw").get<double>(), 97.1);
  const auto lib = evaluate_case(load_model(model().string()), load_dataset(tests_csv().string()), 97.1);
  EXPECT_DOUBLE_EQ(j.at("rmse_kw").get<double>(), lib.rmse_kw);
}

TEST_F(CliChain, EvaluateSavedModelTwiceIsIdentical) {
  const auto d1 = scratch_dir("cli_eval1"), d2 = scratch_dir("cli_eval2");
  const std::string args = "evaluate --seed 3 --model " + q(model()) + " --pool " + q(pool()) + cfg();
  ASSERT_EQ(run_cli(args + " --out " + q(d1)).code, 0);
  ASSERT_EQ(run_cli(args + " --out " + q(d2)).code, 0);
  EXPECT_EQ(read_file(d1 / "metrics.json"), read_file(d2 / "metrics.json"));
  EXPECT_EQ(read_file(d1 / "test_scenarios.csv"), read_file(d2 / "test_scenarios.csv"));
}

TEST_F(CliChain, EvaluateEndToEndFromConfig) {
  const auto dir = scratch_dir("cli_eval_full");
  const auto r = run_cli("evaluate --seed 5 --write-scenarios --out " + q(dir) + cfg());
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* f : {"pool.csv", "training_scenarios.csv", "test_scenarios.csv", "model.json", "metrics.json",
                        "residuals.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_NE(r.output.find("\"rmse_pct\""), std::string::npos);
}
