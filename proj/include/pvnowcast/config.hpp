#pragma once

// JSON configuration. Every key is optional; missing keys keep their defaults.
//
// {
//   "site":     {"latitude", "day_of_year", "gstc", "window_start", "window_end",
//                "cloud": {"event_rate", "min_duration", "max_duration",
//                          "attenuation_min", "attenuation_max", "overcast", "min_ramp"}},
//   "pvs":      {"rated_power", "temp_coeff", "noct", "h3_base", "h3_slope", "h3_noise_sd"},
//   "loads":    [{"name", "jitter", "base_demand",
//                 "phases": [{"amplitude", "variation", "period", "offset", "angle"} x3]}],
//   "num_days": 14,
//   "weather_mix": {"sunny", "partly_cloudy", "cloudy", "rainy"},
//   "scenario": {"num_pv", "shift_max", "min_cloud_duration", "max_drop_ratio",
//                "min_events", "max_events", "max_segment", "retry_budget", "event_tries"},
//   "train":    {"hidden", "batch_size", "epochs", "alpha", "beta1", "beta2", "epsilon",
//                "validation_fraction", "patience"},
//   "train_scenarios": 1500, "test_scenarios": 50
// }

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvnowcast/error.hpp"
#include "pvnowcast/model.hpp"
#include "pvnowcast/scenario.hpp"
#include "pvnowcast/simulator.hpp"

namespace pvnowcast {

using json = nlohmann::ordered_json;

struct PipelineConfig {
  std::string name = "custom";
  SiteSpec site;
  PvsSpec pvs;
  std::vector<LoadSpec> loads = default_loads();
  int num_days = 14;
  WeatherMix weather_mix;
  ScenarioConfig scenario;
  TrainConfig train;
  int train_scenarios = 1500;
  int test_scenarios = 50;

  double capacity_kw() const { return scenario.num_pv * pvs.rated_power; }
};

namespace detail {
template <typename T>
void read(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}
}  // namespace detail

inline json to_json(const CloudParams& c) {
  return {{"event_rate", c.event_rate},         {"min_duration", c.min_duration},
          {"max_duration", c.max_duration},     {"attenuation_min", c.attenuation_min},
          {"attenuation_max", c.attenuation_max}, {"overcast", c.overcast},
          {"min_ramp", c.min_ramp}};
}

inline json to_json(const SiteSpec& s) {
  return {{"latitude", s.latitude},         {"day_of_year", s.day_of_year}, {"gstc", s.gstc},
          {"window_start", s.window_start}, {"window_end", s.window_end},   {"cloud", to_json(s.cloud)}};
}

inline json to_json(const PvsSpec& p) {
  return {{"rated_power", p.rated_power}, {"temp_coeff", p.temp_coeff}, {"noct", p.noct},
          {"h3_base", p.h3_base},         {"h3_slope", p.h3_slope},     {"h3_noise_sd", p.h3_noise_sd}};
}

inline json to_json(const LoadSpec& l) {
  json phases = json::array();
  for (const auto& p : l.phases)
    phases.push_back({{"amplitude", p.amplitude},
                      {"variation", p.variation},
                      {"period", p.period},
                      {"offset", p.offset},
                      {"angle", p.angle}});
  return {{"name", l.name}, {"jitter", l.jitter}, {"base_demand", l.base_demand}, {"phases", phases}};
}

inline json to_json(const WeatherMix& m) {
  return {{"sunny", m.sunny}, {"partly_cloudy", m.partly_cloudy}, {"cloudy", m.cloudy}, {"rainy", m.rainy}};
}

inline json to_json(const ScenarioConfig& c) {
  return {{"num_pv", c.num_pv},
          {"shift_max", c.shift_max},
          {"min_cloud_duration", c.min_cloud_duration},
          {"max_drop_ratio", c.max_drop_ratio},
          {"min_events", c.min_events},
          {"max_events", c.max_events},
          {"max_segment", c.max_segment},
          {"retry_budget", c.retry_budget},
          {"event_tries", c.event_tries}};
}

inline json to_json(const PipelineConfig& c) {
  json loads = json::array();
  for (const auto& l : c.loads) loads.push_back(to_json(l));
  json train = to_json(c.train);
  train.erase("seed");
  return {{"name", c.name},
          {"site", to_json(c.site)},
          {"pvs", to_json(c.pvs)},
          {"loads", loads},
          {"num_days", c.num_days},
          {"weather_mix", to_json(c.weather_mix)},
          {"scenario", to_json(c.scenario)},
          {"train", train},
          {"train_scenarios", c.train_scenarios},
          {"test_scenarios", c.test_scenarios}};
}

/// Overlays the keys present in j onto cfg.
inline void apply_json(const nlohmann::json& j, PipelineConfig& cfg) {
  using detail::read;
  try {
    read(j, "name", cfg.name);
    if (j.contains("site")) {
      const auto& s = j.at("site");
      read(s, "latitude", cfg.site.latitude);
      read(s, "day_of_year", cfg.site.day_of_year);
      read(s, "gstc", cfg.site.gstc);
      read(s, "window_start", cfg.site.window_start);
      read(s, "window_end", cfg.site.window_end);
      if (s.contains("cloud")) {
        const auto& c = s.at("cloud");
        read(c, "event_rate", cfg.site.cloud.event_rate);
        read(c, "min_duration", cfg.site.cloud.min_duration);
        read(c, "max_duration", cfg.site.cloud.max_duration);
        read(c, "attenuation_min", cfg.site.cloud.attenuation_min);
        read(c, "attenuation_max", cfg.site.cloud.attenuation_max);
        read(c, "overcast", cfg.site.cloud.overcast);
        read(c, "min_ramp", cfg.site.cloud.min_ramp);
      }
    }
    if (j.contains("pvs")) {
      const auto& p = j.at("pvs");
      read(p, "rated_power", cfg.pvs.rated_power);
      read(p, "temp_coeff", cfg.pvs.temp_coeff);
      read(p, "noct", cfg.pvs.noct);
      read(p, "h3_base", cfg.pvs.h3_base);
      read(p, "h3_slope", cfg.pvs.h3_slope);
      read(p, "h3_noise_sd", cfg.pvs.h3_noise_sd);
    }
    if (j.contains("loads")) {
      cfg.loads.clear();
      for (const auto& l : j.at("loads")) {
        LoadSpec spec;
        read(l, "name", spec.name);
        read(l, "jitter", spec.jitter);
        read(l, "base_demand", spec.base_demand);
        if (l.contains("phases")) {
          const auto& ph = l.at("phases");
          if (!ph.is_array() || ph.size() != 3) throw DataError("config: load phases must list 3 entries");
          for (int p = 0; p < 3; ++p) {
            read(ph[p], "amplitude", spec.phases[p].amplitude);
            read(ph[p], "variation", spec.phases[p].variation);
            read(ph[p], "period", spec.phases[p].period);
            read(ph[p], "offset", spec.phases[p].offset);
            read(ph[p], "angle", spec.phases[p].angle);
          }
        }
        cfg.loads.push_back(spec);
      }
    }
    read(j, "num_days", cfg.num_days);
    if (j.contains("weather_mix")) {
      const auto& m = j.at("weather_mix");
      read(m, "sunny", cfg.weather_mix.sunny);
      read(m, "partly_cloudy", cfg.weather_mix.partly_cloudy);
      read(m, "cloudy", cfg.weather_mix.cloudy);
      read(m, "rainy", cfg.weather_mix.rainy);
    }
    if (j.contains("scenario")) {
      const auto& s = j.at("scenario");
      read(s, "num_pv", cfg.scenario.num_pv);
      read(s, "shift_max", cfg.scenario.shift_max);
      read(s, "min_cloud_duration", cfg.scenario.min_cloud_duration);
      read(s, "max_drop_ratio", cfg.scenario.max_drop_ratio);
      read(s, "min_events", cfg.scenario.min_events);
      read(s, "max_events", cfg.scenario.max_events);
      read(s, "max_segment", cfg.scenario.max_segment);
      read(s, "retry_budget", cfg.scenario.retry_budget);
      read(s, "event_tries", cfg.scenario.event_tries);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      read(t, "hidden", cfg.train.hidden);
      read(t, "batch_size", cfg.train.batch_size);
      read(t, "epochs", cfg.train.epochs);
      read(t, "alpha", cfg.train.alpha);
      read(t, "beta1", cfg.train.beta1);
      read(t, "beta2", cfg.train.beta2);
      read(t, "epsilon", cfg.train.epsilon);
      read(t, "validation_fraction", cfg.train.validation_fraction);
      read(t, "patience", cfg.train.patience);
    }
    read(j, "train_scenarios", cfg.train_scenarios);
    read(j, "test_scenarios", cfg.test_scenarios);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
}

inline void validate(const PipelineConfig& c) {
  validate(c.site);
  validate(c.pvs);
  validate(c.scenario);
  validate(c.train);
  if (c.num_days < 1) throw DomainError("num_days must be >= 1");
  if (c.train_scenarios < 2 || c.test_scenarios < 1) throw DomainError("scenario counts too small");
}

inline PipelineConfig load_config(const std::string& path, PipelineConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path);
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError("config " + path + " is not a JSON object");
  apply_json(j, base);
  validate(base);
  return base;
}

/// Built-in fixtures. Case a: one 31.4 kW PVS. Case b: three PVSs totalling
/// 97.1 kW with four consumer loads. The full run records 8 h around solar
/// noon with 1500 training scenarios; desk scale records 4 h, synthesizes 300
/// training scenarios and trains for fewer epochs.
inline PipelineConfig case_fixture(char which, bool desk_scale) {
  PipelineConfig c;
  if (which == 'a') {
    c.name = "case-a";
    c.scenario.num_pv = 1;
    c.pvs.rated_power = 31.4;
  } else if (which == 'b') {
    c.name = "case-b";
    c.scenario.num_pv = 3;
    c.pvs.rated_power = 97.1 / 3.0;
  } else {
    throw DomainError(std::string("unknown case '") + which + "'");
  }
  if (desk_scale) {
    c.name += "-desk";
    c.site.window_start = 43200 - 7200;
    c.site.window_end = 43200 + 7200;
    c.train_scenarios = 300;
    c.train.epochs = 40;
    c.train.patience = 8;
  } else {
    c.site.window_start = 43200 - 4 * 3600;
    c.site.window_end = 43200 + 4 * 3600;
    c.train.epochs = 60;
    c.train.patience = 10;
  }
  return c;
}

}  // namespace pvnowcast
