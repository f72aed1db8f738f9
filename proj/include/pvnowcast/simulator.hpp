#pragma once

// Synthetic stand-in for a field measurement campaign: clear-sky irradiance,
// stochastic cloud attenuation, PV output with NOCT derating, affine inverter
// 3rd-harmonic emission and unbalanced single-phase load harmonics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pvnowcast/error.hpp"
#include "pvnowcast/harmonics.hpp"
#include "pvnowcast/measurement.hpp"
#include "pvnowcast/parallel.hpp"
#include "pvnowcast/random.hpp"

namespace pvnowcast {

struct PvsSpec {
  double rated_power = 31.4;   // kW at STC
  double temp_coeff = -0.004;  // 1/°C
  double noct = 45.0;          // °C
  double h3_base = 0.3;        // A
  double h3_slope = 0.08;      // A per kW
  double h3_noise_sd = 0.08;   // A
};

inline void validate(const PvsSpec& s) {
  if (!(s.rated_power > 0.0)) throw DomainError("PvsSpec: rated_power must be > 0");
  if (!(s.temp_coeff >= -0.01 && s.temp_coeff <= 0.0))
    throw DomainError("PvsSpec: temp_coeff must lie in [-0.01, 0]");
  if (!(s.h3_base >= 0.0)) throw DomainError("PvsSpec: h3_base must be >= 0");
  if (!(s.h3_slope > 0.0)) throw DomainError("PvsSpec: h3_slope must be > 0");
  if (!(s.h3_noise_sd >= 0.0)) throw DomainError("PvsSpec: h3_noise_sd must be >= 0");
}

/// Cloud process for one day. Events are non-overlapping; each is a
/// geometric ramp down to `depth`, a gently modulated plateau and a ramp back.
struct CloudParams {
  double event_rate = 4.0;   // events per hour
  int min_duration = 90;     // s, including ramps
  int max_duration = 900;    // s
  double attenuation_min = 0.2;
  double attenuation_max = 0.7;
  double overcast = 1.0;     // multiplicative base attenuation for the whole day
  int min_ramp = 10;         // s
};

struct SiteSpec {
  double latitude = 40.0;  // degrees
  int day_of_year = 172;
  double gstc = 1000.0;    // W/m²
  CloudParams cloud;
  // Optional recording window [window_start, window_end) in seconds since
  // midnight, intersected with daylight. Negative means full daylight.
  int window_start = -1;
  int window_end = -1;
};

inline void validate(const CloudParams& c) {
  if (c.min_duration < 90) throw DomainError("cloud min_duration must be >= 90 s");
  if (c.max_duration < c.min_duration) throw DomainError("cloud max_duration < min_duration");
  if (!(c.event_rate >= 0.0)) throw DomainError("cloud event_rate must be >= 0");
  if (!(c.attenuation_min > 0.0 && c.attenuation_min <= c.attenuation_max && c.attenuation_max < 1.0))
    throw DomainError("cloud attenuation range must satisfy 0 < min <= max < 1");
  if (!(c.overcast > 0.0 && c.overcast <= 1.0)) throw DomainError("cloud overcast must be in (0, 1]");
  if (c.min_ramp < 1) throw DomainError("cloud min_ramp must be >= 1");
}

inline void validate(const SiteSpec& s) {
  if (!(s.latitude > -66.0 && s.latitude < 66.0)) throw DomainError("latitude outside (-66, 66)");
  if (s.day_of_year < 1 || s.day_of_year > 366) throw DomainError("day_of_year outside [1, 366]");
  if (!(s.gstc > 0.0)) throw DomainError("gstc must be > 0");
  validate(s.cloud);
}

/// Sun geometry for the site's day, in local solar time.
struct SolarDay {
  double sunrise = 0.0;        // s since midnight
  double sunset = 0.0;         // s since midnight
  double noon_elevation = 0.0; // rad
  double gmax = 0.0;           // W/m², clear-sky global horizontal irradiance at noon
};

inline SolarDay solar_day(const SiteSpec& site) {
  using std::numbers::pi;
  const double lat = site.latitude * pi / 180.0;
  const double decl = 23.45 * pi / 180.0 * std::sin(2.0 * pi * (284.0 + site.day_of_year) / 365.0);
  const double cos_ws = std::clamp(-std::tan(lat) * std::tan(decl), -1.0, 1.0);
  const double half_day = std::acos(cos_ws) / (2.0 * pi) * kSecondsPerDay;
  SolarDay d;
  d.sunrise = 43200.0 - half_day;
  d.sunset = 43200.0 + half_day;
  d.noon_elevation = pi / 2.0 - std::abs(lat - decl);
  const double sin_el = std::sin(d.noon_elevation);
  const double air_mass = 1.0 / sin_el;
  // Meinel direct-beam attenuation with a 10% diffuse allowance.
  d.gmax = 1.1 * 1353.0 * std::pow(0.7, std::pow(air_mass, 0.678)) * sin_el;
  return d;
}

inline double clear_sky_irradiance(const SolarDay& sun, double t) {
  if (t <= sun.sunrise || t >= sun.sunset) return 0.0;
  const double x = std::sin(std::numbers::pi * (t - sun.sunrise) / (sun.sunset - sun.sunrise));
  return sun.gmax * std::pow(std::max(0.0, x), 1.2);
}

inline double clear_sky_irradiance(const SiteSpec& site, double t) {
  return clear_sky_irradiance(solar_day(site), t);
}

struct DaylightWindow {
  int start = 0;  // first recorded second
  int end = 0;    // one past the last
  int length() const { return end - start; }
};

/// Integer seconds strictly inside (sunrise, sunset), intersected with the
/// site's optional recording window.
inline DaylightWindow daylight_window(const SiteSpec& site) {
  const SolarDay sun = solar_day(site);
  DaylightWindow w{static_cast<int>(std::floor(sun.sunrise)) + 1,
                   static_cast<int>(std::ceil(sun.sunset))};
  if (site.window_start >= 0) w.start = std::max(w.start, site.window_start);
  if (site.window_end >= 0) w.end = std::min(w.end, site.window_end);
  if (w.end <= w.start) throw DomainError("recording window does not overlap daylight");
  return w;
}

inline IrradianceProfile clear_sky_profile(const SiteSpec& site) {
  const SolarDay sun = solar_day(site);
  const DaylightWindow w = daylight_window(site);
  IrradianceProfile p{w.start, {}};
  p.values.reserve(static_cast<std::size_t>(w.length()));
  for (int t = w.start; t < w.end; ++t) p.values.push_back(clear_sky_irradiance(sun, t));
  return p;
}

struct CloudEvent {
  int start = 0;     // s since midnight
  int duration = 0;  // s
  double depth = 1.0;
};

/// Attenuation α(t) ∈ (0, 1] over a daylight window, plus the events that shaped it.
struct CloudField {
  int t0 = 0;
  std::vector<double> alpha;
  std::vector<CloudEvent> events;

  double at(int t) const { return alpha[static_cast<std::size_t>(t - t0)]; }
};

inline CloudField cloud_field(const CloudParams& params, const DaylightWindow& window, Rng& rng) {
  validate(params);
  CloudField f{window.start, std::vector<double>(static_cast<std::size_t>(window.length()), params.overcast), {}};
  if (params.event_rate <= 0.0) return f;

  std::exponential_distribution<double> gap(params.event_rate / 3600.0);
  std::uniform_int_distribution<int> duration(params.min_duration, params.max_duration);
  std::uniform_real_distribution<double> depth(params.attenuation_min, params.attenuation_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  double t = window.start + gap(rng);
  while (true) {
    const int start = static_cast<int>(std::ceil(t));
    const int room = window.end - start;
    if (room < params.min_duration) break;
    const int dur = std::min(duration(rng), room);
    const double d = depth(rng);
    const double mod_period = 60.0 + 240.0 * unit(rng);
    const double mod_phase = 2.0 * std::numbers::pi * unit(rng);
    const int ramp = std::clamp(dur / 6, params.min_ramp, 60);
    for (int k = 0; k < dur; ++k) {
      const double level = std::min(1.0, std::min(k + 1, dur - k) / static_cast<double>(ramp));
      const double dk = std::min(0.99, d * (1.0 + 0.1 * std::sin(2.0 * std::numbers::pi * k / mod_period + mod_phase)));
      f.alpha[static_cast<std::size_t>(start - window.start + k)] = params.overcast * std::exp(level * std::log(dk));
    }
    f.events.push_back({start, dur, d});
    t = start + dur + 1 + gap(rng);
  }
  return f;
}

inline CloudField cloud_field(const SiteSpec& site, Rng& rng) {
  return cloud_field(site.cloud, daylight_window(site), rng);
}

/// NOCT cell temperature and linear derating, clamped to [0, rated].
inline double pv_power(double g, double t_ambient, const PvsSpec& spec) {
  const double t_cell = t_ambient + (spec.noct - 20.0) * g / 800.0;
  const double p = spec.rated_power * (g / 1000.0) * (1.0 + spec.temp_coeff * (t_cell - 25.0));
  return std::clamp(p, 0.0, spec.rated_power);
}

/// Affine-in-power 3rd-harmonic amplitude with Gaussian noise, clamped at 0.
inline double inverter_h3(double p, const PvsSpec& spec, Rng& rng) {
  double h = spec.h3_base + spec.h3_slope * p;
  if (spec.h3_noise_sd > 0.0) h += std::normal_distribution<double>(0.0, spec.h3_noise_sd)(rng);
  return std::max(0.0, h);
}

// ---------------------------------------------------------------------------
// Consumer loads

/// 3rd-harmonic injection on one phase: A(t) = amplitude·(1 + variation·sin(2πt/period + offset)).
struct PhaseInjection {
  double amplitude = 0.0;  // A
  double variation = 0.0;  // fraction of amplitude
  double period = 3600.0;  // s
  double offset = 0.0;     // rad, envelope phase
  double angle = 0.0;      // rad, phasor angle of the injected current

  double envelope(double t) const {
    return std::max(0.0, amplitude * (1.0 + variation * std::sin(2.0 * std::numbers::pi * t / period + offset)));
  }
};

struct LoadSpec {
  std::string name;
  std::array<PhaseInjection, 3> phases;
  double jitter = 0.0;       // relative Gaussian amplitude noise per second
  double base_demand = 0.0;  // kW, informational
};

/// Per-phase vector sum of the loads' order-3 phasors at time t.
inline PhaseTriple load_h3_phasors(const std::vector<LoadSpec>& loads, double t, Rng& rng) {
  PhaseTriple sum{};
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const auto& load : loads)
    for (int p = 0; p < 3; ++p) {
      const auto& inj = load.phases[p];
      if (inj.amplitude <= 0.0) continue;
      double a = inj.envelope(t);
      if (load.jitter > 0.0) a = std::max(0.0, a * (1.0 + load.jitter * noise(rng)));
      sum[p] += std::polar(a, inj.angle);
    }
  return sum;
}

/// Four single/two-phase consumers spread over the phases so that their 3rd
/// harmonics largely cancel in the zero sequence while staying unbalanced.
inline std::vector<LoadSpec> default_loads() {
  using std::numbers::pi;
  const double a0 = 0.3;
  std::vector<LoadSpec> loads(4);
  loads[0].name = "house-1";
  loads[0].phases[0] = {0.35, 0.4, 2700.0, 0.0, a0};
  loads[0].base_demand = 4.0;
  loads[1].name = "house-2";
  loads[1].phases[1] = {0.35, 0.4, 3300.0, 1.0, a0 - 2.0 * pi / 3.0};
  loads[1].base_demand = 5.0;
  loads[2].name = "house-3";
  loads[2].phases[2] = {0.35, 0.4, 3900.0, 2.0, a0 + 2.0 * pi / 3.0};
  loads[2].base_demand = 3.5;
  loads[3].name = "shop";
  loads[3].phases[0] = {0.12, 0.3, 1800.0, 0.5, 1.2};
  loads[3].phases[1] = {0.08, 0.3, 1800.0, 0.5, -0.5};
  loads[3].base_demand = 8.0;
  for (auto& l : loads) l.jitter = 0.05;
  return loads;
}

// ---------------------------------------------------------------------------
// Pool simulation

struct WeatherMix {
  int sunny = 4;
  int partly_cloudy = 5;
  int cloudy = 3;
  int rainy = 2;

  int total() const { return sunny + partly_cloudy + cloudy + rainy; }
};

/// Cloud process used to generate a day of the given weather kind.
inline CloudParams cloud_params_for(DayLabel kind, const CloudParams& base) {
  CloudParams c = base;
  switch (kind) {
    case DayLabel::sunny:
      c.event_rate = 0.0;
      c.overcast = 1.0;
      break;
    case DayLabel::partly_cloudy:
      break;
    case DayLabel::cloudy:
      c.event_rate = 2.0 * base.event_rate;
      c.attenuation_min = 0.15;
      c.attenuation_max = 0.5;
      c.overcast = 0.75;
      break;
    case DayLabel::rainy:
      c.event_rate = 0.5 * base.event_rate;
      c.attenuation_min = 0.4;
      c.attenuation_max = 0.8;
      c.overcast = 0.2;
      break;
  }
  return c;
}

/// Weather kind of each simulated day: the mix is spread over num_days and
/// shuffled with the master seed.
inline std::vector<DayLabel> weather_sequence(const WeatherMix& mix, int num_days, std::uint64_t seed) {
  if (num_days < 1) throw DomainError("num_days must be >= 1");
  if (mix.sunny < 1 || mix.partly_cloudy < 0 || mix.cloudy < 0 || mix.rainy < 0)
    throw DomainError("weather mix must include at least one sunny day");
  std::vector<DayLabel> kinds;
  kinds.insert(kinds.end(), mix.sunny, DayLabel::sunny);
  kinds.insert(kinds.end(), mix.partly_cloudy, DayLabel::partly_cloudy);
  kinds.insert(kinds.end(), mix.cloudy, DayLabel::cloudy);
  kinds.insert(kinds.end(), mix.rainy, DayLabel::rainy);
  const auto total = static_cast<std::size_t>(kinds.size());
  std::vector<DayLabel> out(static_cast<std::size_t>(num_days));
  for (std::size_t d = 0; d < out.size(); ++d) out[d] = kinds[d * total / out.size()];
  Rng rng = make_rng(seed, {0x57u});
  std::shuffle(out.begin() + 1, out.end(), rng);  // day 0 keeps the guaranteed sunny slot
  return out;
}

/// Ambient temperature: daily sinusoid peaking at 15:00 local solar time.
inline double ambient_temperature(double t, double daily_mean, double swing) {
  return daily_mean + 0.5 * swing * std::sin(2.0 * std::numbers::pi * (t - 9.0 * 3600.0) / kSecondsPerDay);
}

inline std::string day_id_for(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "d%02d", index + 1);
  return buf;
}

inline DaySeries simulate_day(const SiteSpec& site, const PvsSpec& pvs, DayLabel kind, int day_index,
                              std::uint64_t master_seed) {
  Rng rng = make_rng(master_seed, {0xDA7u, static_cast<std::uint64_t>(day_index)});
  const SolarDay sun = solar_day(site);
  const DaylightWindow window = daylight_window(site);
  const CloudField clouds = cloud_field(cloud_params_for(kind, site.cloud), window, rng);
  std::normal_distribution<double> mean_temp(kind == DayLabel::rainy ? 19.0 : 26.0, 2.5);
  std::uniform_real_distribution<double> swing(6.0, 12.0);
  const double t_mean = mean_temp(rng);
  const double t_swing = kind == DayLabel::rainy ? 0.5 * swing(rng) : swing(rng);

  DaySeries day{day_id_for(day_index), {}, kind};
  day.samples.reserve(static_cast<std::size_t>(window.length()));
  for (int t = window.start; t < window.end; ++t) {
    Sample s;
    s.t = t;
    s.temperature = ambient_temperature(t, t_mean, t_swing);
    s.irradiance = clear_sky_irradiance(sun, t) * clouds.at(t);
    s.power = pv_power(s.irradiance, s.temperature, pvs);
    s.h3_amp = inverter_h3(s.power, pvs, rng);
    day.samples.push_back(s);
  }
  return day;
}

/// Simulates num_days of 1 s records. Day i draws from derive_seed(seed, day i),
/// so the result is independent of the worker count. Labels come from
/// classify_day against the clear-sky model.
inline MeasurementPool simulate_pool(const SiteSpec& site, const PvsSpec& pvs, int num_days,
                                     const WeatherMix& mix, std::uint64_t seed,
                                     const ClassifierThresholds& th = {}) {
  validate(site);
  validate(pvs);
  const auto kinds = weather_sequence(mix, num_days, seed);
  MeasurementPool pool;
  pool.days.resize(kinds.size());
  parallel_for(kinds.size(), [&](std::size_t i) {
    pool.days[i] = simulate_day(site, pvs, kinds[i], static_cast<int>(i), seed);
  });
  label_pool(pool, clear_sky_profile(site), th);
  return pool;
}

// ---------------------------------------------------------------------------
// Waveform emission

struct WaveformOptions {
  double sample_rate = 2500.0;
  double fundamental = 50.0;
  double phase_voltage = 230.0;      // V rms, converts kW to fundamental current
  double background_amplitude = 0.02;  // A, orders other than 1 and 3
};

/// Three-phase current for seconds [t_start, t_start + seconds) of a day.
/// Order 1 follows power, order 3 carries the recorded inverter H3 amplitude
/// (co-phasal on all phases) plus optional load injections; all other orders
/// get a small background amplitude with per-second jitter.
inline Waveform emit_waveform(const DaySeries& day, int t_start, int seconds,
                              const std::vector<LoadSpec>& loads, std::uint64_t seed,
                              const WaveformOptions& opt = {}) {
  using std::numbers::pi;
  Waveform w;
  w.sample_rate = opt.sample_rate;
  w.fundamental = opt.fundamental;
  w.t0 = t_start;
  const double per_second = opt.sample_rate;
  if (std::abs(per_second - std::round(per_second)) > 1e-9)
    throw DomainError("sample_rate must be an integer number of samples per second");
  const auto n_sec = static_cast<std::size_t>(std::round(per_second));
  for (auto& p : w.phases) p.resize(n_sec * static_cast<std::size_t>(seconds));
  Rng rng = make_rng(seed, {0x3A7Eu, static_cast<std::uint64_t>(t_start)});
  std::uniform_real_distribution<double> jitter(0.5, 1.5);

  for (int s = 0; s < seconds; ++s) {
    const int t = t_start + s;
    if (!day.contains(t)) throw DomainError("waveform range outside the day's samples");
    const Sample& rec = day.at_time(t);
    std::array<PhaseTriple, kMaxHarmonicOrder + 1> ph{};
    const double i1 = rec.power * 1000.0 * std::sqrt(2.0) / (3.0 * opt.phase_voltage);
    const PhaseTriple loads3 = load_h3_phasors(loads, t, rng);
    for (int p = 0; p < 3; ++p) {
      ph[1][p] = std::polar(i1, -2.0 * pi / 3.0 * p);
      ph[3][p] = Phasor(rec.h3_amp, 0.0) + loads3[p];
    }
    for (int h = 2; h <= kMaxHarmonicOrder; ++h) {
      if (h == 3) continue;
      const double a = opt.background_amplitude * jitter(rng);
      for (int p = 0; p < 3; ++p) ph[h][p] = std::polar(a, -2.0 * pi / 3.0 * p * h);
    }
    const std::size_t base = static_cast<std::size_t>(s) * n_sec;
    for (std::size_t k = 0; k < n_sec; ++k) {
      const double tau = static_cast<double>(k) / opt.sample_rate;
      for (int p = 0; p < 3; ++p) {
        double v = 0.0;
        for (int h = 1; h <= kMaxHarmonicOrder; ++h) {
          const Phasor& z = ph[h][p];
          v += std::abs(z) * std::cos(2.0 * pi * h * opt.fundamental * tau + std::arg(z));
        }
        w.phases[p][base + k] = v;
      }
    }
  }
  return w;
}

}  // namespace pvnowcast
