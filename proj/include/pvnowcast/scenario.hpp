#pragma once

// Monte Carlo scenario synthesis.
//
// A scenario starts from a randomly drawn sunny day, copied once per PVS.
// Cloud events splice contiguous runs of real records from non-sunny days
// into those copies; PVS i >= 2 receives each event displaced by its own
// latency in [-shift_max, shift_max]. Spliced records are moved in time,
// never altered, so every tuple in a scenario exists verbatim in the pool.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "pvnowcast/csv.hpp"
#include "pvnowcast/error.hpp"
#include "pvnowcast/harmonics.hpp"
#include "pvnowcast/measurement.hpp"
#include "pvnowcast/parallel.hpp"
#include "pvnowcast/random.hpp"
#include "pvnowcast/simulator.hpp"

namespace pvnowcast {

struct ScenarioConfig {
  int num_pv = 1;
  int shift_max = 300;           // s, maximum cloud latency between PVSs
  int min_cloud_duration = 90;   // s
  double max_drop_ratio = 0.9;   // largest admissible 1 s relative irradiance decrease
  int min_events = 2;            // replacement events per scenario, uniform in [min, max]
  int max_events = 12;
  int max_segment = 1800;        // s, longest spliced run
  int retry_budget = 100;        // whole-scenario attempts before giving up
  int event_tries = 200;         // placement draws per event within one attempt
  std::uint64_t seed = 0;
};

inline void validate(const ScenarioConfig& c) {
  if (c.num_pv < 1) throw DomainError("num_pv must be >= 1");
  if (c.shift_max < 0) throw DomainError("shift_max must be >= 0");
  if (c.min_cloud_duration < 1) throw DomainError("min_cloud_duration must be >= 1");
  if (!(c.max_drop_ratio > 0.0 && c.max_drop_ratio < 1.0))
    throw DomainError("max_drop_ratio must lie in (0, 1)");
  if (c.min_events < 0 || c.max_events < c.min_events)
    throw DomainError("replacement event range must satisfy 0 <= min <= max");
  if (c.max_segment < c.min_cloud_duration) throw DomainError("max_segment < min_cloud_duration");
  if (c.retry_budget < 1 || c.event_tries < 1) throw DomainError("retry budgets must be >= 1");
}

enum class ScenarioKind { training, testing };

inline std::string_view to_string(ScenarioKind k) {
  return k == ScenarioKind::training ? "training" : "testing";
}

/// One spliced run in a PVS series.
struct Splice {
  int event = 0;              // index of the cloud event this run belongs to
  int position = 0;           // first replaced second in the series
  int length = 0;             // s
  std::size_t source_day = 0; // index into pool.days
  int source_start = 0;       // first source second
  int shift = 0;              // position minus S_1's position for the same event
};

struct PvsSeries {
  std::vector<Sample> samples;
  std::vector<Splice> splices;
};

struct Scenario {
  int id = 0;
  ScenarioKind kind = ScenarioKind::training;
  std::size_t sunny_day = 0;
  int t0 = 0;
  std::vector<PvsSeries> pvs;             // S_1 .. S_num_pv
  std::vector<double> temperature;        // from S_1
  std::vector<double> irradiance;         // from S_1
  std::vector<double> h3_feature;         // A
  std::vector<double> aggregate_power;    // kW
  std::vector<PhaseTriple> load_phasors;  // testing only: per-phase load order-3 injection

  std::size_t length() const { return aggregate_power.size(); }
};

struct Violation {
  std::string constraint;  // irradiance_drop | cloud_duration | shift | aggregation | provenance
  int t = 0;
  std::string detail;
};

struct ValidationReport {
  bool passed = true;
  std::vector<Violation> violations;

  void add(std::string constraint, int t, std::string detail) {
    passed = false;
    violations.push_back({std::move(constraint), t, std::move(detail)});
  }
};

/// Hash set of every (temperature, irradiance, h3, power) tuple in a pool,
/// keyed on exact bit patterns.
class ProvenanceIndex {
 public:
  explicit ProvenanceIndex(const MeasurementPool& pool) {
    set_.reserve(pool.num_samples());
    for (const auto& d : pool.days)
      for (const Sample& s : d.samples) set_.insert(key(s));
  }
  bool contains(const Sample& s) const { return set_.contains(key(s)); }

 private:
  struct Key {
    std::uint64_t a, b, c, d;
    bool operator==(const Key&) const = default;
  };
  struct Hash {
    std::size_t operator()(const Key& k) const noexcept {
      return static_cast<std::size_t>(mix64(k.a ^ mix64(k.b ^ mix64(k.c ^ mix64(k.d)))));
    }
  };
  static Key key(const Sample& s) {
    return {std::bit_cast<std::uint64_t>(s.temperature), std::bit_cast<std::uint64_t>(s.irradiance),
            std::bit_cast<std::uint64_t>(s.h3_amp), std::bit_cast<std::uint64_t>(s.power)};
  }
  std::unordered_set<Key, Hash> set_;
};

/// Feeder-head zero-sequence magnitude for aggregated PVS H3 (co-phasal on
/// every phase, angle 0) plus per-phase load injections.
inline double feeder_h3_feature(double pvs_h3_sum, const PhaseTriple& loads) {
  const Phasor pv(pvs_h3_sum, 0.0);
  return std::abs(zero_sequence(PhaseTriple{pv + loads[0], pv + loads[1], pv + loads[2]}));
}

namespace detail {

inline bool drop_ok(double prev, double cur, double max_drop_ratio) {
  return !(prev > 0.0) || cur >= (1.0 - max_drop_ratio) * prev;
}

/// Fills the aggregated feature/target columns from the PVS series.
inline void aggregate(Scenario& s) {
  const std::size_t n = s.pvs.front().samples.size();
  s.temperature.resize(n);
  s.irradiance.resize(n);
  s.h3_feature.resize(n);
  s.aggregate_power.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    double p = 0.0, h = 0.0;
    for (const auto& series : s.pvs) {
      p += series.samples[j].power;
      h += series.samples[j].h3_amp;
    }
    s.temperature[j] = s.pvs.front().samples[j].temperature;
    s.irradiance[j] = s.pvs.front().samples[j].irradiance;
    s.aggregate_power[j] = p;
    s.h3_feature[j] = s.kind == ScenarioKind::training ? h : feeder_h3_feature(h, s.load_phasors[j]);
  }
}

struct Attempt {
  bool ok = false;
  std::string failure;
};

inline Attempt splice_attempt(const MeasurementPool& pool, const ScenarioConfig& cfg,
                              const std::vector<std::size_t>& sources, Rng& rng, Scenario& s) {
  s.sunny_day = select_sunny_index(pool, rng);
  const DaySeries& sunny = pool.days[s.sunny_day];
  s.t0 = sunny.start_t();
  const int t_end = sunny.end_t();
  s.pvs.assign(static_cast<std::size_t>(cfg.num_pv), PvsSeries{sunny.samples, {}});

  std::uniform_int_distribution<int> n_events(cfg.min_events, cfg.max_events);
  std::uniform_int_distribution<std::size_t> pick_source(0, sources.size() - 1);
  std::uniform_int_distribution<int> seg_len(cfg.min_cloud_duration, cfg.max_segment);
  std::uniform_int_distribution<int> shift(-cfg.shift_max, cfg.shift_max);

  const int events = n_events(rng);
  std::vector<int> pos(s.pvs.size());
  std::vector<int> shifts(s.pvs.size());
  for (int e = 0; e < events; ++e) {
    bool placed = false;
    std::string blocked = "cloud_duration: no source run long enough";
    for (int attempt = 0; attempt < cfg.event_tries && !placed; ++attempt) {
      const std::size_t src_idx = sources[pick_source(rng)];
      const DaySeries& src = pool.days[src_idx];
      const int len = seg_len(rng);
      const int lo = std::max(s.t0, src.start_t());
      const int hi = std::min(t_end, src.end_t()) - len;
      if (hi < lo) {
        blocked = "cloud_duration: no source day covers a " + std::to_string(len) + " s run";
        continue;
      }
      const int src_start = std::uniform_int_distribution<int>(lo, hi)(rng);
      for (std::size_t i = 0; i < s.pvs.size(); ++i) {
        shifts[i] = i == 0 ? 0 : shift(rng);
        pos[i] = src_start + shifts[i];
      }

      bool ok = true;
      for (std::size_t i = 0; i < s.pvs.size() && ok; ++i) {
        const int p = pos[i];
        if (p < s.t0 || p + len > t_end) {
          blocked = "shift: shifted run leaves the day";
          ok = false;
          break;
        }
        // Keep a clean gap of at least one template second between runs.
        for (const Splice& sp : s.pvs[i].splices)
          if (p < sp.position + sp.length + 1 && sp.position < p + len + 1) ok = false;
        if (!ok) {
          blocked = "overlap: run collides with an earlier event";
          break;
        }
        const auto& series = s.pvs[i].samples;
        const auto idx = [&](int t) { return static_cast<std::size_t>(t - s.t0); };
        if (p > s.t0 && !detail::drop_ok(series[idx(p - 1)].irradiance, src.at_time(src_start).irradiance,
                                         cfg.max_drop_ratio))
          ok = false;
        if (ok && p + len < t_end &&
            !detail::drop_ok(src.at_time(src_start + len - 1).irradiance, series[idx(p + len)].irradiance,
                             cfg.max_drop_ratio))
          ok = false;
      }
      for (int k = 1; k < len && ok; ++k)
        if (!detail::drop_ok(src.at_time(src_start + k - 1).irradiance, src.at_time(src_start + k).irradiance,
                             cfg.max_drop_ratio))
          ok = false;
      if (!ok) {
        if (blocked.rfind("overlap", 0) != 0 && blocked.rfind("shift", 0) != 0)
          blocked = "irradiance_drop: every candidate run breaks the 1 s drop bound";
        continue;
      }

      for (std::size_t i = 0; i < s.pvs.size(); ++i) {
        auto& series = s.pvs[i].samples;
        for (int k = 0; k < len; ++k) {
          Sample rec = src.at_time(src_start + k);
          rec.t = pos[i] + k;
          series[static_cast<std::size_t>(rec.t - s.t0)] = rec;
        }
        s.pvs[i].splices.push_back({e, pos[i], len, src_idx, src_start, shifts[i]});
      }
      placed = true;
    }
    if (!placed)
      return {false, blocked + " (cloud event " + std::to_string(e) + ")"};
  }
  return {true, {}};
}

inline std::vector<std::size_t> non_sunny_days(const MeasurementPool& pool) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pool.days.size(); ++i)
    if (pool.days[i].label != DayLabel::sunny) out.push_back(i);
  return out;
}

}  // namespace detail

/// Checks the three cloud constraints, cross-PVS latency, exact aggregation
/// and (when an index is given) provenance of every tuple. Never throws on
/// violations; they are reported.
inline ValidationReport validate_scenario(const Scenario& s, const ScenarioConfig& cfg,
                                          const ProvenanceIndex* provenance = nullptr) {
  ValidationReport r;
  if (s.pvs.empty()) {
    r.add("aggregation", s.t0, "scenario has no PVS series");
    return r;
  }
  const std::size_t n = s.pvs.front().samples.size();
  for (std::size_t i = 0; i < s.pvs.size(); ++i) {
    const auto& series = s.pvs[i];
    const std::string who = "S_" + std::to_string(i + 1);
    if (series.samples.size() != n) {
      r.add("aggregation", s.t0, who + " length differs from S_1");
      return r;
    }
    for (std::size_t j = 1; j < n; ++j) {
      const double prev = series.samples[j - 1].irradiance, cur = series.samples[j].irradiance;
      if (!detail::drop_ok(prev, cur, cfg.max_drop_ratio))
        r.add("irradiance_drop", series.samples[j].t,
              who + ": ratio " + std::to_string(cur / prev) + " below " +
                  std::to_string(1.0 - cfg.max_drop_ratio));
    }
    for (const Splice& sp : series.splices) {
      if (sp.length < cfg.min_cloud_duration)
        r.add("cloud_duration", sp.position,
              who + ": cloud segment of " + std::to_string(sp.length) + " s shorter than " +
                  std::to_string(cfg.min_cloud_duration) + " s");
      if (std::abs(sp.shift) > cfg.shift_max)
        r.add("shift", sp.position,
              who + ": latency " + std::to_string(sp.shift) + " s exceeds shift_max " +
                  std::to_string(cfg.shift_max));
      if (i > 0) {
        const auto& first = s.pvs.front().splices;
        auto it = std::find_if(first.begin(), first.end(), [&](const Splice& f) { return f.event == sp.event; });
        if (it == first.end() || it->position + sp.shift != sp.position)
          r.add("shift", sp.position, who + ": splice does not match S_1's event position plus shift");
      }
    }
  }
  const bool sizes_ok = s.aggregate_power.size() == n && s.h3_feature.size() == n &&
                        s.temperature.size() == n && s.irradiance.size() == n &&
                        (s.kind == ScenarioKind::training || s.load_phasors.size() == n);
  if (!sizes_ok) {
    r.add("aggregation", s.t0, "feature columns are not aligned with the PVS series");
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      double p = 0.0, h = 0.0;
      for (const auto& series : s.pvs) {
        p += series.samples[j].power;
        h += series.samples[j].h3_amp;
      }
      const double feature = s.kind == ScenarioKind::training ? h : feeder_h3_feature(h, s.load_phasors[j]);
      const int t = s.pvs.front().samples[j].t;
      if (p != s.aggregate_power[j]) r.add("aggregation", t, "aggregate power differs from the PVS sum");
      if (feature != s.h3_feature[j]) r.add("aggregation", t, "h3 feature differs from the PVS injections");
      if (s.temperature[j] != s.pvs.front().samples[j].temperature ||
          s.irradiance[j] != s.pvs.front().samples[j].irradiance)
        r.add("aggregation", t, "temperature/irradiance not taken from S_1");
    }
  }
  if (provenance)
    for (std::size_t i = 0; i < s.pvs.size(); ++i)
      for (const Sample& rec : s.pvs[i].samples)
        if (!provenance->contains(rec))
          r.add("provenance", rec.t, "S_" + std::to_string(i + 1) + " tuple not found in the pool");
  return r;
}

namespace detail {

inline Scenario synthesize(const MeasurementPool& pool, const ScenarioConfig& cfg, Rng& rng,
                           ScenarioKind kind, const std::vector<LoadSpec>& loads) {
  validate(cfg);
  const auto sources = non_sunny_days(pool);
  if (sources.empty()) throw DomainError("pool contains no non-sunny day to splice from");
  std::string last_failure;
  for (int attempt = 0; attempt < cfg.retry_budget; ++attempt) {
    Scenario s;
    s.kind = kind;
    const Attempt a = splice_attempt(pool, cfg, sources, rng, s);
    if (!a.ok) {
      last_failure = a.failure;
      continue;
    }
    if (kind == ScenarioKind::testing) {
      std::vector<LoadSpec> scenario_loads = loads;
      std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
      for (auto& l : scenario_loads)
        for (auto& inj : l.phases) inj.offset += phase(rng);
      s.load_phasors.reserve(s.pvs.front().samples.size());
      for (const Sample& rec : s.pvs.front().samples)
        s.load_phasors.push_back(load_h3_phasors(scenario_loads, rec.t, rng));
    }
    aggregate(s);
    const ValidationReport report = validate_scenario(s, cfg);
    if (report.passed) return s;
    last_failure = report.violations.front().constraint + ": " + report.violations.front().detail;
  }
  throw SynthesisError("scenario constraints unsatisfied after " + std::to_string(cfg.retry_budget) +
                       " attempts (" + last_failure + ")");
}

}  // namespace detail

inline Scenario synthesize_training_scenario(const MeasurementPool& pool, const ScenarioConfig& cfg, Rng& rng) {
  return detail::synthesize(pool, cfg, rng, ScenarioKind::training, {});
}

inline Scenario synthesize_test_scenario(const MeasurementPool& pool, const std::vector<LoadSpec>& loads,
                                         const ScenarioConfig& cfg, Rng& rng) {
  if (loads.empty()) throw DomainError("test scenarios need at least one load");
  return detail::synthesize(pool, cfg, rng, ScenarioKind::testing, loads);
}

/// Scenario i of a set drawn from master seed `seed` (ids start at 1).
inline Scenario synthesize_scenario(const MeasurementPool& pool, const ScenarioConfig& cfg, ScenarioKind kind,
                                    const std::vector<LoadSpec>& loads, std::uint64_t seed, int id) {
  Rng rng = make_rng(seed, {kind == ScenarioKind::training ? 0x7Au : 0x7Bu, static_cast<std::uint64_t>(id)});
  Scenario s = kind == ScenarioKind::training ? synthesize_training_scenario(pool, cfg, rng)
                                              : synthesize_test_scenario(pool, loads, cfg, rng);
  s.id = id;
  return s;
}

// ---------------------------------------------------------------------------
// Flat feature/target table

struct Dataset {
  std::vector<int> scenario_id;
  std::vector<int> t;
  std::vector<double> temperature;
  std::vector<double> irradiance;
  std::vector<double> h3_feature;
  std::vector<double> power;

  std::size_t rows() const { return power.size(); }

  void reserve(std::size_t n) {
    scenario_id.reserve(n);
    t.reserve(n);
    temperature.reserve(n);
    irradiance.reserve(n);
    h3_feature.reserve(n);
    power.reserve(n);
  }

  void append(const Scenario& s) {
    for (std::size_t j = 0; j < s.length(); ++j) {
      scenario_id.push_back(s.id);
      t.push_back(s.t0 + static_cast<int>(j));
      temperature.push_back(s.temperature[j]);
      irradiance.push_back(s.irradiance[j]);
      h3_feature.push_back(s.h3_feature[j]);
      power.push_back(s.aggregate_power[j]);
    }
  }

  void append(const Dataset& d) {
    scenario_id.insert(scenario_id.end(), d.scenario_id.begin(), d.scenario_id.end());
    t.insert(t.end(), d.t.begin(), d.t.end());
    temperature.insert(temperature.end(), d.temperature.begin(), d.temperature.end());
    irradiance.insert(irradiance.end(), d.irradiance.begin(), d.irradiance.end());
    h3_feature.insert(h3_feature.end(), d.h3_feature.begin(), d.h3_feature.end());
    power.insert(power.end(), d.power.begin(), d.power.end());
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Synthesizes scenarios 1..n_scenarios (each from its own derived seed, in
/// parallel) and concatenates them in id order.
inline Dataset build_dataset(const MeasurementPool& pool, const ScenarioConfig& cfg, int n_scenarios,
                             std::uint64_t seed, ScenarioKind kind = ScenarioKind::training,
                             const std::vector<LoadSpec>& loads = {}) {
  if (n_scenarios < 1) throw DomainError("n_scenarios must be >= 1");
  std::vector<Dataset> parts(static_cast<std::size_t>(n_scenarios));
  parallel_for(parts.size(), [&](std::size_t i) {
    const Scenario s = synthesize_scenario(pool, cfg, kind, loads, seed, static_cast<int>(i) + 1);
    parts[i].reserve(s.length());
    parts[i].append(s);
  });
  std::size_t total = 0;
  for (const auto& p : parts) total += p.rows();
  Dataset out;
  out.reserve(total);
  for (auto& p : parts) {
    out.append(p);
    p = Dataset{};
  }
  return out;
}

// Scenario CSV: scenario_id,t,temperature_c,irradiance_wm2,h3_feature_a,aggregate_power_kw
// Values are written with shortest round-trip formatting.

inline void write_dataset_csv(std::ostream& out, const Dataset& d) {
  out << "scenario_id,t,temperature_c,irradiance_wm2,h3_feature_a,aggregate_power_kw\n";
  for (std::size_t i = 0; i < d.rows(); ++i)
    out << d.scenario_id[i] << ',' << d.t[i] << ',' << csv::format_exact(d.temperature[i]) << ','
        << csv::format_exact(d.irradiance[i]) << ',' << csv::format_exact(d.h3_feature[i]) << ','
        << csv::format_exact(d.power[i]) << '\n';
}

inline void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_dataset_csv(out, d);
}

/// Reads a scenario/feature CSV. scenario_id, t and aggregate_power_kw are
/// optional (0, row index and NaN when absent); the three features are required.
inline Dataset load_dataset(const std::string& path) {
  csv::Reader reader(path);
  const auto c_id = reader.find("scenario_id");
  const auto c_t = reader.find("t");
  const auto c_p = reader.find("aggregate_power_kw");
  const std::size_t c_temp = reader.require("temperature_c");
  const std::size_t c_irr = reader.require("irradiance_wm2");
  const std::size_t c_h3 = reader.require("h3_feature_a");
  Dataset d;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    const auto where = [&] { return path + ":" + std::to_string(reader.line_number()) + ": "; };
    const auto num = [&](std::size_t c) {
      auto v = csv::parse_double(f[c]);
      if (!v) throw DataError(where() + "malformed value in column '" + reader.columns()[c] + "'");
      return *v;
    };
    const auto integer = [&](std::size_t c) {
      auto v = csv::parse_int(f[c]);
      if (!v) throw DataError(where() + "malformed integer in column '" + reader.columns()[c] + "'");
      return static_cast<int>(*v);
    };
    d.scenario_id.push_back(c_id ? integer(*c_id) : 0);
    d.t.push_back(c_t ? integer(*c_t) : static_cast<int>(d.t.size()));
    d.temperature.push_back(num(c_temp));
    d.irradiance.push_back(num(c_irr));
    d.h3_feature.push_back(num(c_h3));
    d.power.push_back(c_p ? num(*c_p) : std::nan(""));
  }
  return d;
}

}  // namespace pvnowcast
