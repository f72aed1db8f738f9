#pragma once

// Measurement pool: 1 s records grouped into days, CSV ingestion and
// clear-sky-index day classification.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pvnowcast/csv.hpp"
#include "pvnowcast/error.hpp"
#include "pvnowcast/random.hpp"

namespace pvnowcast {

inline constexpr int kSecondsPerDay = 86400;

/// One 1 s record: ambient temperature (°C), plane irradiance (W/m²),
/// inverter 3rd-harmonic current amplitude (A) and PV output (kW).
struct Sample {
  int t = 0;  // seconds since local midnight
  double temperature = 0.0;
  double irradiance = 0.0;
  double h3_amp = 0.0;
  double power = 0.0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

enum class DayLabel { sunny, partly_cloudy, cloudy, rainy };

inline std::string_view to_string(DayLabel l) {
  switch (l) {
    case DayLabel::sunny: return "sunny";
    case DayLabel::partly_cloudy: return "partly_cloudy";
    case DayLabel::cloudy: return "cloudy";
    case DayLabel::rainy: return "rainy";
  }
  return "unknown";
}

struct DaySeries {
  std::string day_id;
  std::vector<Sample> samples;
  DayLabel label = DayLabel::sunny;

  std::size_t size() const { return samples.size(); }
  int start_t() const { return samples.front().t; }
  /// One past the last timestamp.
  int end_t() const { return samples.back().t + 1; }
  bool contains(int t) const { return !samples.empty() && t >= start_t() && t < end_t(); }
  /// Requires contains(t); valid because samples are gap-free at 1 s.
  const Sample& at_time(int t) const { return samples[static_cast<std::size_t>(t - start_t())]; }
};

/// Throws DataError unless the day is non-empty, gap-free at 1 s and every
/// sample is within range.
inline void validate_day(const DaySeries& d) {
  if (d.samples.empty()) throw DataError("day '" + d.day_id + "' has no samples");
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const Sample& s = d.samples[i];
    if (s.t < 0 || s.t >= kSecondsPerDay)
      throw DataError("day '" + d.day_id + "': timestamp " + std::to_string(s.t) +
                      " outside [0, 86400)");
    if (!(s.irradiance >= 0.0) || !(s.h3_amp >= 0.0) || !(s.power >= 0.0) ||
        !std::isfinite(s.temperature) || !std::isfinite(s.irradiance) ||
        !std::isfinite(s.h3_amp) || !std::isfinite(s.power))
      throw DataError("day '" + d.day_id + "' t=" + std::to_string(s.t) +
                      ": irradiance, h3 and power must be finite and non-negative");
    if (i == 0) continue;
    const int prev = d.samples[i - 1].t;
    if (s.t == prev)
      throw DataError("day '" + d.day_id + "': duplicated timestamp " + std::to_string(s.t));
    if (s.t < prev)
      throw DataError("day '" + d.day_id + "': non-monotone timestamp " + std::to_string(s.t) +
                      " after " + std::to_string(prev));
    if (s.t != prev + 1)
      throw DataError("day '" + d.day_id + "': missing samples between t=" +
                      std::to_string(prev) + " and t=" + std::to_string(s.t));
  }
}

/// The data set W: a list of measured days D_j.
struct MeasurementPool {
  std::vector<DaySeries> days;

  std::size_t num_meas() const { return days.size(); }
  std::size_t num_samples() const {
    std::size_t n = 0;
    for (const auto& d : days) n += d.size();
    return n;
  }
};

inline void validate_pool(const MeasurementPool& pool) {
  std::set<std::string> ids;
  for (const auto& d : pool.days) {
    validate_day(d);
    if (!ids.insert(d.day_id).second) throw DataError("duplicate day_id '" + d.day_id + "'");
  }
}

/// Column names used to bind CSV headers to Sample fields.
struct PoolSchema {
  std::string day_id = "day_id";
  std::string t = "t";
  std::string temperature = "temperature_c";
  std::string irradiance = "irradiance_wm2";
  std::string h3_amp = "h3_amp_a";
  std::string power = "power_kw";
};

/// Irradiance reference on a 1 s grid starting at t0.
struct IrradianceProfile {
  int t0 = 0;
  std::vector<double> values;

  bool contains(int t) const {
    return t >= t0 && t < t0 + static_cast<int>(values.size());
  }
  double at(int t) const { return values[static_cast<std::size_t>(t - t0)]; }
};

struct ClassifierThresholds {
  double sunny_index = 0.9;   // sunny needs k >= this
  int sunny_max_events = 3;   // ... and fewer drop events than this
  double rainy_index = 0.3;   // k < this
  double cloudy_index = 0.7;  // k < this
  double event_index = 0.8;   // a drop event is a run with irradiance/clear_sky below this
  double min_reference_wm2 = 50.0;  // reference values below this are ignored
};

struct ClearSkyIndexStats {
  double mean_index = 0.0;
  int drop_events = 0;
  std::size_t overlap = 0;
};

inline ClearSkyIndexStats clear_sky_index_stats(const DaySeries& d, const IrradianceProfile& clear_sky,
                                                const ClassifierThresholds& th = {}) {
  ClearSkyIndexStats st;
  double sum = 0.0;
  bool in_event = false;
  for (const Sample& s : d.samples) {
    if (!clear_sky.contains(s.t)) {
      in_event = false;
      continue;
    }
    const double ref = clear_sky.at(s.t);
    if (!(ref >= th.min_reference_wm2)) {
      in_event = false;
      continue;
    }
    const double k = s.irradiance / ref;
    sum += k;
    ++st.overlap;
    const bool below = k < th.event_index;
    if (below && !in_event) ++st.drop_events;
    in_event = below;
  }
  if (st.overlap == 0)
    throw DomainError("day '" + d.day_id + "' has no overlap with the clear-sky reference");
  st.mean_index = sum / static_cast<double>(st.overlap);
  return st;
}

inline DayLabel classify_day(const DaySeries& d, const IrradianceProfile& clear_sky,
                             const ClassifierThresholds& th = {}) {
  const auto st = clear_sky_index_stats(d, clear_sky, th);
  if (st.mean_index >= th.sunny_index && st.drop_events < th.sunny_max_events) return DayLabel::sunny;
  if (st.mean_index < th.rainy_index) return DayLabel::rainy;
  if (st.mean_index < th.cloudy_index) return DayLabel::cloudy;
  return DayLabel::partly_cloudy;
}

/// Per-second upper envelope of irradiance across all days. Used as the
/// clear-sky reference when no irradiance model is available (measured data).
inline IrradianceProfile clear_sky_envelope(const MeasurementPool& pool) {
  IrradianceProfile env;
  if (pool.days.empty()) return env;
  int lo = kSecondsPerDay, hi = 0;
  for (const auto& d : pool.days) {
    lo = std::min(lo, d.start_t());
    hi = std::max(hi, d.end_t());
  }
  env.t0 = lo;
  env.values.assign(static_cast<std::size_t>(hi - lo), 0.0);
  for (const auto& d : pool.days)
    for (const Sample& s : d.samples) {
      double& v = env.values[static_cast<std::size_t>(s.t - lo)];
      v = std::max(v, s.irradiance);
    }
  return env;
}

inline void label_pool(MeasurementPool& pool, const IrradianceProfile& clear_sky,
                       const ClassifierThresholds& th = {}) {
  for (auto& d : pool.days) d.label = classify_day(d, clear_sky, th);
}

/// Reads a pool CSV. Rows are grouped by day id in order of first appearance;
/// days are labelled against the pool's own irradiance envelope.
inline MeasurementPool load_pool(const std::string& path, const PoolSchema& schema = {},
                                 const ClassifierThresholds& th = {}) {
  csv::Reader reader(path);
  const std::size_t c_day = reader.require(schema.day_id);
  const std::size_t c_t = reader.require(schema.t);
  const std::size_t c_temp = reader.require(schema.temperature);
  const std::size_t c_irr = reader.require(schema.irradiance);
  const std::size_t c_h3 = reader.require(schema.h3_amp);
  const std::size_t c_p = reader.require(schema.power);

  MeasurementPool pool;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    const auto where = [&] { return path + ":" + std::to_string(reader.line_number()) + ": "; };
    const auto num = [&](std::size_t c, const std::string& name) {
      auto v = csv::parse_double(f[c]);
      if (!v) throw DataError(where() + "malformed value for '" + name + "'");
      return *v;
    };
    const auto t = csv::parse_int(f[c_t]);
    if (!t) throw DataError(where() + "malformed timestamp");
    Sample s{static_cast<int>(*t), num(c_temp, schema.temperature), num(c_irr, schema.irradiance),
             num(c_h3, schema.h3_amp), num(c_p, schema.power)};
    std::string id(csv::trim(f[c_day]));
    if (id.empty()) throw DataError(where() + "empty day_id");
    auto [it, inserted] = index.try_emplace(id, pool.days.size());
    if (inserted) pool.days.push_back(DaySeries{id, {}, DayLabel::sunny});
    auto& day = pool.days[it->second];
    if (!day.samples.empty()) {
      const int prev = day.samples.back().t;
      if (s.t == prev)
        throw DataError(where() + "day '" + id + "': duplicated timestamp " + std::to_string(s.t));
      if (s.t < prev)
        throw DataError(where() + "day '" + id + "': non-monotone timestamp " + std::to_string(s.t));
    }
    day.samples.push_back(s);
  }
  validate_pool(pool);
  if (!pool.days.empty()) label_pool(pool, clear_sky_envelope(pool), th);
  return pool;
}

inline void write_pool_csv(std::ostream& out, const MeasurementPool& pool) {
  out << "day_id,t,temperature_c,irradiance_wm2,h3_amp_a,power_kw\n";
  for (const auto& d : pool.days)
    for (const Sample& s : d.samples)
      out << d.day_id << ',' << s.t << ',' << csv::format_double(s.temperature) << ','
          << csv::format_double(s.irradiance) << ',' << csv::format_double(s.h3_amp) << ','
          << csv::format_double(s.power) << '\n';
}

inline void save_pool(const MeasurementPool& pool, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_pool_csv(out, pool);
  if (!out) throw DataError("write failed: " + path);
}

/// Index into pool.days of a uniformly drawn sunny day.
inline std::size_t select_sunny_index(const MeasurementPool& pool, Rng& rng) {
  std::vector<std::size_t> sunny;
  for (std::size_t i = 0; i < pool.days.size(); ++i)
    if (pool.days[i].label == DayLabel::sunny) sunny.push_back(i);
  if (sunny.empty()) throw DomainError("pool contains no sunny day");
  std::uniform_int_distribution<std::size_t> pick(0, sunny.size() - 1);
  return sunny[pick(rng)];
}

inline const DaySeries& select_sunny_day(const MeasurementPool& pool, Rng& rng) {
  return pool.days[select_sunny_index(pool, rng)];
}

}  // namespace pvnowcast
