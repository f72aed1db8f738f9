#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pvnowcast/pvnowcast.hpp"

namespace fs = std::filesystem;
using namespace pvnowcast;

namespace {

/// Options shared by the commands that need a pipeline configuration.
struct ConfigOptions {
  std::string case_name;
  std::string config_path;
  bool full = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--case", case_name, "Built-in case fixture")->check(CLI::IsMember({"a", "b"}));
    cmd->add_option("--config", config_path, "JSON config overlay")->check(CLI::ExistingFile);
    cmd->add_flag("--full", full, "Use the full-scale fixture instead of desk scale");
  }

  PipelineConfig resolve() const {
    PipelineConfig base = case_name.empty() ? PipelineConfig{} : case_fixture(case_name[0], !full);
    if (config_path.empty()) {
      validate(base);
      return base;
    }
    return load_config(config_path, base);
  }
};

std::ofstream open_output(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

RunManifest manifest_for(const std::string& command, const PipelineConfig* cfg) {
  RunManifest m;
  m.command = command;
  if (cfg) m.config = to_json(*cfg);
  return m;
}

void write_correlations(const fs::path& path, const std::map<int, double>& table, std::size_t n) {
  auto out = open_output(path);
  out << "order,pearson_r,n\n";
  for (const auto& [order, r] : table) out << order << ',' << csv::format_exact(r) << ',' << n << '\n';
  std::cout << "order  pearson_r\n";
  for (const auto& [order, r] : table) std::printf("%5d  %9.4f\n", order, r);
}

/// Per-order amplitude series built from one 1 s waveform record every
/// `stride` seconds across all days of the pool.
HarmonicSeries pool_harmonic_series(const MeasurementPool& pool, int stride, std::uint64_t seed) {
  struct Point {
    std::size_t day;
    int t;
  };
  std::vector<Point> points;
  for (std::size_t d = 0; d < pool.days.size(); ++d)
    for (int t = pool.days[d].start_t(); t < pool.days[d].end_t(); t += stride) points.push_back({d, t});
  std::set<int> orders;
  for (int h = 1; h <= kMaxHarmonicOrder; ++h) orders.insert(h);

  std::vector<std::array<double, kMaxHarmonicOrder + 1>> amp(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    const Waveform w = emit_waveform(pool.days[points[i].day], points[i].t, 1, {},
                                     derive_seed(seed, {points[i].day}));
    const auto set = extract_phasors(w, orders);
    for (int h : orders) amp[i][h] = set.amplitude(h, 0);
  });

  HarmonicSeries s;
  for (int h : orders) {
    auto& v = s.amplitudes[h];
    v.reserve(points.size());
    for (const auto& a : amp) v.push_back(a[h]);
  }
  for (const auto& p : points) s.power.push_back(pool.days[p.day].at_time(p.t).power);
  return s;
}

int cmd_simulate(const ConfigOptions& co, std::uint64_t seed, int days, const fs::path& out_dir,
                 const std::string& wf_day, int wf_start, int wf_seconds, bool wf_loads) {
  PipelineConfig cfg = co.resolve();
  if (days > 0) cfg.num_days = days;
  const auto seeds = PipelineSeeds::from(seed);
  const MeasurementPool pool = simulate_pool(cfg.site, cfg.pvs, cfg.num_days, cfg.weather_mix, seeds.pool);
  fs::create_directories(out_dir);
  RunManifest m = manifest_for("simulate", &cfg);
  m.seeds = {{"master", seed}, {"pool", seeds.pool}};
  save_pool(pool, (out_dir / "pool.csv").string());
  m.add_output(out_dir / "pool.csv");

  std::cout << "simulated " << pool.num_meas() << " days, " << pool.num_samples() << " samples\n";
  for (const auto& d : pool.days) std::cout << "  " << d.day_id << "  " << to_string(d.label) << '\n';

  if (!wf_day.empty()) {
    const auto it = std::find_if(pool.days.begin(), pool.days.end(),
                                 [&](const DaySeries& d) { return d.day_id == wf_day; });
    if (it == pool.days.end()) throw DataError("no day '" + wf_day + "' in the simulated pool");
    const int start = wf_start >= 0 ? wf_start : it->start_t();
    const auto wseed = derive_seed(seed, {5});
    m.seeds["waveform"] = wseed;
    const Waveform w =
        emit_waveform(*it, start, wf_seconds, wf_loads ? cfg.loads : std::vector<LoadSpec>{}, wseed);
    save_waveform(w, (out_dir / "waveform.csv").string());
    m.add_output(out_dir / "waveform.csv");
    m.add_output(out_dir / "waveform.csv.json");
  }
  m.write(out_dir);
  return 0;
}

int cmd_correlate(const std::string& pool_path, const std::string& waveform_path, const std::string& day,
                  int stride, std::uint64_t seed, const fs::path& out_dir) {
  const MeasurementPool pool = load_pool(pool_path);
  fs::create_directories(out_dir);
  RunManifest m = manifest_for("correlate", nullptr);
  m.add_input(pool_path);
  m.seeds = {{"master", seed}};

  HarmonicSeries series;
  if (waveform_path.empty()) {
    series = pool_harmonic_series(pool, stride, seed);
  } else {
    if (day.empty()) throw DomainError("--waveform requires --day");
    const auto it = std::find_if(pool.days.begin(), pool.days.end(),
                                 [&](const DaySeries& d) { return d.day_id == day; });
    if (it == pool.days.end()) throw DataError("no day '" + day + "' in " + pool_path);
    const Waveform w = load_waveform(waveform_path);
    m.add_input(waveform_path);
    std::set<int> orders;
    for (int h = 1; h <= kMaxHarmonicOrder; ++h)
      if (h * w.fundamental < w.sample_rate / 2.0) orders.insert(h);
    series.amplitudes = harmonic_amplitude_series(w, orders);
    const std::size_t n = series.amplitudes.begin()->second.size();
    for (std::size_t s = 0; s < n; ++s) {
      const int t = static_cast<int>(std::lround(w.t0)) + static_cast<int>(s);
      if (!it->contains(t)) throw DataError("waveform extends beyond day '" + day + "'");
      series.power.push_back(it->at_time(t).power);
    }
  }
  const auto table = correlation_table(series);
  write_correlations(out_dir / "correlation.csv", table, series.power.size());
  m.add_output(out_dir / "correlation.csv");
  m.write(out_dir);
  return 0;
}

int cmd_synthesize(const ConfigOptions& co, const std::string& pool_path, const std::string& kind_name,
                   int scenarios, std::uint64_t seed, const fs::path& out_dir) {
  const PipelineConfig cfg = co.resolve();
  const MeasurementPool pool = load_pool(pool_path);
  const bool testing = kind_name == "testing";
  const auto seeds = PipelineSeeds::from(seed);
  const std::uint64_t s = testing ? seeds.testing : seeds.training;
  const int n = scenarios > 0 ? scenarios : (testing ? cfg.test_scenarios : cfg.train_scenarios);
  const Dataset d = build_dataset(pool, cfg.scenario, n, s, testing ? ScenarioKind::testing : ScenarioKind::training,
                                  cfg.loads);
  fs::create_directories(out_dir);
  RunManifest m = manifest_for("synthesize", &cfg);
  m.add_input(pool_path);
  m.seeds = {{"master", seed}, {testing ? "testing" : "training", s}};
  const fs::path file = out_dir / (testing ? "test_scenarios.csv" : "training_scenarios.csv");
  save_dataset(d, file.string());
  m.add_output(file);
  m.write(out_dir);
  std::cout << "wrote " << n << ' ' << kind_name << " scenarios (" << d.rows() << " rows) to " << file.string()
            << '\n';
  return 0;
}

int cmd_train(const ConfigOptions& co, const std::string& data_path, std::uint64_t seed, const fs::path& out_dir) {
  const PipelineConfig cfg = co.resolve();
  const Dataset d = load_dataset(data_path);
  TrainConfig tc = cfg.train;
  tc.seed = PipelineSeeds::from(seed).model;
  const TrainResult r = train(d, tc);
  fs::create_directories(out_dir);
  RunManifest m = manifest_for("train", &cfg);
  m.add_input(data_path);
  m.seeds = {{"master", seed}, {"model", tc.seed}};
  save_model(r.model, (out_dir / "model.json").string(), r.config_fingerprint);
  m.add_output(out_dir / "model.json");
  {
    auto log = open_output(out_dir / "training_log.csv");
    write_training_log(log, r.log);
  }
  m.add_output(out_dir / "training_log.csv");
  m.write(out_dir);
  std::cout << "trained " << r.log.size() << " epochs, best epoch " << r.best_epoch << '\n';
  return 0;
}

int cmd_nowcast(const std::string& model_path, const std::string& input, const fs::path& out_dir) {
  const MlpModel model = load_model(model_path);
  const Dataset d = load_dataset(input);
  if (d.rows() == 0) throw DataError(input + ": no data rows to nowcast");
  fs::create_directories(out_dir);
  RunManifest m = manifest_for("nowcast", nullptr);
  m.add_input(model_path);
  m.add_input(input);
  {
    auto out = open_output(out_dir / "nowcast.csv");
    out << "scenario_id,t,nowcast_kw\n";
    for (std::size_t i = 0; i < d.rows(); ++i)
      out << d.scenario_id[i] << ',' << d.t[i] << ','
          << csv::format_exact(forward(model, {d.temperature[i], d.irradiance[i], d.h3_feature[i]})) << '\n';
  }
  m.add_output(out_dir / "nowcast.csv");
  m.write(out_dir);
  std::cout << "nowcast " << d.rows() << " rows\n";
  return 0;
}

int cmd_evaluate(const ConfigOptions& co, std::uint64_t seed, int scenarios, const std::string& model_path,
                 const std::string& pool_path, bool write_scenarios, const fs::path& out_dir) {
  if (co.case_name.empty() && co.config_path.empty()) throw DomainError("evaluate needs --case or --config");
  PipelineConfig cfg = co.resolve();
  if (scenarios > 0) cfg.train_scenarios = scenarios;
  validate(cfg);

  EvalReport report;
  if (model_path.empty()) {
    const PipelineResult r = run_pipeline(cfg, seed, out_dir, write_scenarios);
    report = r.report;
    std::cout << "training: " << r.training.log.size() << " epochs in " << r.train_seconds << " s\n";
  } else {
    if (pool_path.empty()) throw DomainError("--model requires --pool");
    const MlpModel model = load_model(model_path);
    const MeasurementPool pool = load_pool(pool_path);
    const auto seeds = PipelineSeeds::from(seed);
    const Dataset test = build_dataset(pool, cfg.scenario, cfg.test_scenarios, seeds.testing, ScenarioKind::testing,
                                       cfg.loads);
    report = evaluate_case(model, test, cfg.capacity_kw());
    RunManifest m = manifest_for("evaluate", &cfg);
    m.add_input(model_path);
    m.add_input(pool_path);
    m.seeds = {{"master", seed}, {"testing", seeds.testing}};
    fs::create_directories(out_dir);
    save_dataset(test, (out_dir / "test_scenarios.csv").string());
    m.add_output(out_dir / "test_scenarios.csv");
    const auto files = emit_report(report, test.scenario_id.front(), out_dir);
    m.add_output(files.metrics);
    m.add_output(files.residuals);
    m.add_output(files.plot);
    m.write(out_dir);
  }
  std::cout << metrics_json(report).dump(2) << '\n';
  return 0;
}

int cmd_report(const ConfigOptions& co, const std::string& model_path, const std::string& data_path,
               double capacity, int scenario, const fs::path& out_dir) {
  if (!(capacity > 0.0)) {
    if (co.case_name.empty() && co.config_path.empty())
      throw DomainError("report needs --capacity, --case or --config");
    capacity = co.resolve().capacity_kw();
  }
  const MlpModel model = load_model(model_path);
  const Dataset d = load_dataset(data_path);
  const EvalReport r = evaluate_case(model, d, capacity);
  const int id = scenario >= 0 ? scenario : d.scenario_id.front();
  RunManifest m = manifest_for("report", nullptr);
  m.add_input(model_path);
  m.add_input(data_path);
  const auto files = emit_report(r, id, out_dir);
  m.add_output(files.metrics);
  m.add_output(files.residuals);
  m.add_output(files.plot);
  m.write(out_dir);
  std::cout << metrics_json(r).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behind-the-meter PV nowcasting toolkit", "pvnowcast"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  std::string out;
  std::string pool, model, data, waveform, day, kind = "training";
  int scenarios = 0, days = 0, stride = 300, wf_start = -1, wf_seconds = 60, scenario_id = -1;
  double capacity = 0.0;
  bool with_loads = false, write_scenarios = false;
  ConfigOptions co;

  const auto common = [&](CLI::App* c) {
    c->add_option("--seed", seed, "Master seed");
    c->add_option("--out", out, "Output directory")->required();
  };

  auto* sim = app.add_subcommand("simulate", "Generate a measurement pool");
  common(sim);
  co.attach(sim);
  sim->add_option("--days", days, "Number of days (overrides config)")->check(CLI::PositiveNumber);
  auto* wf = sim->add_option("--waveform-day", day, "Also emit a three-phase current waveform for this day");
  sim->add_option("--waveform-start", wf_start, "First second of the waveform")->needs(wf);
  sim->add_option("--waveform-seconds", wf_seconds, "Waveform length in seconds")->needs(wf)
      ->check(CLI::PositiveNumber);
  sim->add_flag("--with-loads", with_loads, "Add consumer load injections to the waveform")->needs(wf);

  auto* cor = app.add_subcommand("correlate", "Per-order harmonic amplitude vs power correlation");
  common(cor);
  cor->add_option("--pool", pool, "Pool CSV")->required()->check(CLI::ExistingFile);
  auto* cw = cor->add_option("--waveform", waveform, "Waveform CSV from simulate")->check(CLI::ExistingFile);
  cor->add_option("--day", day, "Pool day the waveform belongs to")->needs(cw);
  cor->add_option("--stride", stride, "Seconds between sampled records when no waveform is given")
      ->check(CLI::PositiveNumber);

  auto* syn = app.add_subcommand("synthesize", "Synthesize a training or testing scenario set");
  common(syn);
  co.attach(syn);
  syn->add_option("--pool", pool, "Pool CSV")->required()->check(CLI::ExistingFile);
  syn->add_option("--kind", kind, "Scenario kind")->check(CLI::IsMember({"training", "testing"}));
  syn->add_option("--scenarios", scenarios, "Number of scenarios")->check(CLI::PositiveNumber);

  auto* trn = app.add_subcommand("train", "Train the nowcasting model");
  common(trn);
  co.attach(trn);
  trn->add_option("--data", data, "Training scenario CSV")->required()->check(CLI::ExistingFile);

  auto* now = app.add_subcommand("nowcast", "Nowcast aggregated PV power for a feature CSV");
  common(now);
  now->add_option("--model", model, "Model JSON")->required()->check(CLI::ExistingFile);
  now->add_option("--input", data, "Feature CSV")->required()->check(CLI::ExistingFile);

  auto* ev = app.add_subcommand("evaluate", "Run and score a case end to end");
  common(ev);
  co.attach(ev);
  ev->add_option("--scenarios", scenarios, "Training scenarios (overrides config)")->check(CLI::PositiveNumber);
  auto* em = ev->add_option("--model", model, "Score this model instead of training one")->check(CLI::ExistingFile);
  ev->add_option("--pool", pool, "Pool CSV used with --model")->needs(em)->check(CLI::ExistingFile);
  ev->add_flag("--write-scenarios", write_scenarios, "Also write the training scenario CSV");

  auto* rep = app.add_subcommand("report", "Metrics, residuals and plot for a model on a scenario CSV");
  common(rep);
  co.attach(rep);
  rep->add_option("--model", model, "Model JSON")->required()->check(CLI::ExistingFile);
  rep->add_option("--data", data, "Testing scenario CSV")->required()->check(CLI::ExistingFile);
  rep->add_option("--capacity", capacity, "Installed capacity in kW (percent base)");
  rep->add_option("--scenario", scenario_id, "Scenario id to plot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) return cmd_simulate(co, seed, days, out, day, wf_start, wf_seconds, with_loads);
    if (*cor) return cmd_correlate(pool, waveform, day, stride, seed, out);
    if (*syn) return cmd_synthesize(co, pool, kind, scenarios, seed, out);
    if (*trn) return cmd_train(co, data, seed, out);
    if (*now) return cmd_nowcast(model, data, out);
    if (*ev) return cmd_evaluate(co, seed, scenarios, model, pool, write_scenarios, out);
    if (*rep) return cmd_report(co, model, data, capacity, scenario_id, out);
  } catch (const std::exception& e) {
    std::cerr << "pvnowcast: error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
