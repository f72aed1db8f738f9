#pragma once

// End-to-end runs (simulate -> synthesize -> train -> evaluate) and the run
// manifest written next to every CLI output.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvnowcast/config.hpp"
#include "pvnowcast/digest.hpp"
#include "pvnowcast/measurement.hpp"
#include "pvnowcast/metrics.hpp"
#include "pvnowcast/model.hpp"
#include "pvnowcast/scenario.hpp"
#include "pvnowcast/simulator.hpp"

namespace pvnowcast {

inline constexpr const char* kVersion = "1.0.0";

/// Everything needed to reproduce a run: seeds, config digest, tool version,
/// and digests of input and output files.
struct RunManifest {
  std::string command;
  std::map<std::string, std::uint64_t> seeds;
  nlohmann::ordered_json config;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256

  void add_input(const std::string& path) { inputs[path] = sha256_file(path); }
  void add_output(const std::filesystem::path& path) { outputs[path.filename().string()] = sha256_file(path.string()); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = "pvnowcast";
    j["version"] = kVersion;
    j["command"] = command;
    j["seeds"] = seeds;
    j["config_sha256"] = config.is_null() ? std::string{} : sha256_hex(config.dump());
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["threads_env"] = std::getenv("PVNOWCAST_THREADS") ? std::getenv("PVNOWCAST_THREADS") : "";
    return j;
  }

  void write(const std::filesystem::path& out_dir) const {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir / "manifest.json", std::ios::binary);
    if (!out) throw DataError("cannot write manifest in " + out_dir.string());
    out << to_json().dump(2) << '\n';
  }
};

/// Stream seeds of a pipeline run, all derived from one master seed.
struct PipelineSeeds {
  std::uint64_t pool, training, testing, model;

  static PipelineSeeds from(std::uint64_t master) {
    return {derive_seed(master, {1}), derive_seed(master, {2}), derive_seed(master, {3}),
            derive_seed(master, {4})};
  }
};

inline std::uint64_t pool_digest(const MeasurementPool& pool) {
  std::ostringstream s;
  write_pool_csv(s, pool);
  const auto hex = sha256_hex(s.str());
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

struct PipelineResult {
  MeasurementPool pool;
  TrainResult training;
  Dataset test_set;
  EvalReport report;
  double train_seconds = 0.0;
};

/// Runs the full chain from a master seed. When out_dir is non-empty, writes
/// pool.csv, model.json, training_log.csv, the report files, the test
/// scenario CSV and a manifest; training scenarios are written only on request.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, std::uint64_t master_seed,
                                   const std::filesystem::path& out_dir = {},
                                   bool write_training_scenarios = false) {
  validate(cfg);
  const auto seeds = PipelineSeeds::from(master_seed);
  PipelineResult r;
  r.pool = simulate_pool(cfg.site, cfg.pvs, cfg.num_days, cfg.weather_mix, seeds.pool);

  Dataset training = build_dataset(r.pool, cfg.scenario, cfg.train_scenarios, seeds.training);
  TrainConfig tc = cfg.train;
  tc.seed = seeds.model;
  const auto start = std::chrono::steady_clock::now();
  r.training = train(training, tc);
  r.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  r.test_set = build_dataset(r.pool, cfg.scenario, cfg.test_scenarios, seeds.testing, ScenarioKind::testing,
                             cfg.loads);
  r.report = evaluate_case(r.training.model, r.test_set, cfg.capacity_kw());

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    RunManifest m;
    m.command = "evaluate";
    m.seeds = {{"master", master_seed},
               {"pool", seeds.pool},
               {"training", seeds.training},
               {"testing", seeds.testing},
               {"model", seeds.model}};
    m.config = to_json(cfg);
    const auto emit = [&](const std::filesystem::path& p) { m.add_output(p); };
    save_pool(r.pool, (out_dir / "pool.csv").string());
    emit(out_dir / "pool.csv");
    if (write_training_scenarios) {
      save_dataset(training, (out_dir / "training_scenarios.csv").string());
      emit(out_dir / "training_scenarios.csv");
    }
    save_dataset(r.test_set, (out_dir / "test_scenarios.csv").string());
    emit(out_dir / "test_scenarios.csv");
    save_model(r.training.model, (out_dir / "model.json").string(), r.training.config_fingerprint);
    emit(out_dir / "model.json");
    {
      std::ofstream log(out_dir / "training_log.csv", std::ios::binary);
      write_training_log(log, r.training.log);
    }
    emit(out_dir / "training_log.csv");
    const auto files = emit_report(r.report, r.test_set.scenario_id.front(), out_dir);
    emit(files.metrics);
    emit(files.residuals);
    emit(files.plot);
    m.write(out_dir);
  }
  return r;
}

}  // namespace pvnowcast
