#pragma once

// Harmonic phasor extraction, zero-sequence filtering and the Pearson
// correlation screen between harmonic amplitudes and PV output.
//
// Phasor convention: a component A·cos(2π·h·f0·(t - t_start) + φ) has phasor
// A·e^{jφ}, with t_start the first sample of the extraction window.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvnowcast/csv.hpp"
#include "pvnowcast/error.hpp"

namespace pvnowcast {

using Phasor = std::complex<double>;
using PhaseTriple = std::array<Phasor, 3>;  // phases a, b, c

inline constexpr int kMaxHarmonicOrder = 23;

/// Angle of a phasor mapped into (-π, π].
inline double phasor_angle(Phasor p) {
  const double a = std::arg(p);
  return a <= -std::numbers::pi ? std::numbers::pi : a;
}

/// Three-phase current record. Phase arrays share one time base.
struct Waveform {
  std::array<std::vector<double>, 3> phases;
  double sample_rate = 10000.0;  // Hz
  double fundamental = 50.0;     // Hz
  double t0 = 0.0;               // time of the first sample, s

  std::size_t size() const { return phases[0].size(); }
};

inline void validate_waveform(const Waveform& w) {
  if (!(w.fundamental > 0.0) || !(w.sample_rate > 0.0))
    throw DomainError("waveform sample_rate and fundamental must be positive");
  if (w.phases[1].size() != w.phases[0].size() || w.phases[2].size() != w.phases[0].size())
    throw DomainError("waveform phase arrays differ in length");
  if (w.sample_rate < 2.0 * kMaxHarmonicOrder * w.fundamental)
    throw DomainError("sample_rate below Nyquist for harmonic order 23");
}

/// Per-order, per-phase phasors.
struct HarmonicPhasorSet {
  std::map<int, PhaseTriple> orders;

  const PhaseTriple& at(int order) const {
    auto it = orders.find(order);
    if (it == orders.end()) throw DomainError("order " + std::to_string(order) + " not extracted");
    return it->second;
  }
  double amplitude(int order, int phase) const { return std::abs(at(order)[phase]); }
  double angle(int order, int phase) const { return phasor_angle(at(order)[phase]); }
};

struct SequencePhasor {
  int order = 3;
  Phasor zero_seq{};
};

/// Number of samples spanned by `cycles` fundamental periods; throws unless integral.
inline std::size_t window_samples(double sample_rate, double fundamental, int cycles) {
  const double n = cycles * sample_rate / fundamental;
  const double r = std::round(n);
  if (cycles < 1 || std::abs(n - r) > 1e-9 * std::max(1.0, n))
    throw DomainError("extraction window of " + std::to_string(cycles) +
                      " cycles is not an integer number of samples");
  return static_cast<std::size_t>(r);
}

/// Single-bin DFT at `order` × fundamental over x[0, n), where n spans exactly
/// `cycles` fundamental periods. Twiddle angles use exact integer phase
/// indices, so exact-bin tones are leakage-free to rounding.
inline Phasor single_bin_dft(std::span<const double> x, int order, int cycles) {
  const std::size_t n = x.size();
  const std::size_t step = static_cast<std::size_t>(order) * static_cast<std::size_t>(cycles);
  const double w = 2.0 * std::numbers::pi / static_cast<double>(n);
  double re = 0.0, im = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double th = w * static_cast<double>(k);
    re += x[i] * std::cos(th);
    im -= x[i] * std::sin(th);
    k += step;
    if (k >= n) k %= n;
  }
  const double scale = 2.0 / static_cast<double>(n);
  return {re * scale, im * scale};
}

/// Phasors for the requested orders over a window of `window_cycles`
/// fundamental periods starting at sample `start`.
inline HarmonicPhasorSet extract_phasors(const Waveform& w, const std::set<int>& orders,
                                         int window_cycles = 10, std::size_t start = 0) {
  validate_waveform(w);
  const std::size_t n = window_samples(w.sample_rate, w.fundamental, window_cycles);
  if (start + n > w.size()) throw DomainError("extraction window exceeds waveform length");
  HarmonicPhasorSet out;
  for (int h : orders) {
    if (h < 1) throw DomainError("harmonic order must be >= 1");
    if (h * w.fundamental >= w.sample_rate / 2.0)
      throw DomainError("harmonic order " + std::to_string(h) + " is beyond Nyquist");
    PhaseTriple p;
    for (int ph = 0; ph < 3; ++ph)
      p[ph] = single_bin_dft(std::span<const double>(w.phases[ph]).subspan(start, n), h, window_cycles);
    out.orders.emplace(h, p);
  }
  return out;
}

/// (Ia + Ib + Ic) / 3.
inline Phasor zero_sequence(const PhaseTriple& p) { return (p[0] + p[1] + p[2]) / 3.0; }

inline SequencePhasor zero_sequence(const HarmonicPhasorSet& set, int order) {
  return {order, zero_sequence(set.at(order))};
}

/// Sliding |zero sequence| of one order: a `window_cycles` window at the
/// start of every hop (default 1 s). One value per complete window.
inline std::vector<double> zero_sequence_amplitude_series(const Waveform& w, int order = 3,
                                                          int window_cycles = 10,
                                                          double hop_seconds = 1.0) {
  validate_waveform(w);
  const std::size_t n = window_samples(w.sample_rate, w.fundamental, window_cycles);
  const double hop = hop_seconds * w.sample_rate;
  if (std::abs(hop - std::round(hop)) > 1e-9 || hop < 1.0)
    throw DomainError("hop is not an integer number of samples");
  const auto hop_n = static_cast<std::size_t>(std::round(hop));
  std::vector<double> out;
  for (std::size_t s = 0; s + n <= w.size(); s += hop_n)
    out.push_back(std::abs(zero_sequence(extract_phasors(w, {order}, window_cycles, s), order).zero_seq));
  return out;
}

/// Sliding mean-over-phases amplitude for each requested order.
inline std::map<int, std::vector<double>> harmonic_amplitude_series(const Waveform& w,
                                                                    const std::set<int>& orders,
                                                                    int window_cycles = 10,
                                                                    double hop_seconds = 1.0) {
  validate_waveform(w);
  const std::size_t n = window_samples(w.sample_rate, w.fundamental, window_cycles);
  const auto hop_n = static_cast<std::size_t>(std::round(hop_seconds * w.sample_rate));
  if (hop_n < 1) throw DomainError("hop is shorter than one sample");
  std::map<int, std::vector<double>> out;
  for (std::size_t s = 0; s + n <= w.size(); s += hop_n) {
    const auto set = extract_phasors(w, orders, window_cycles, s);
    for (int h : orders)
      out[h].push_back((set.amplitude(h, 0) + set.amplitude(h, 1) + set.amplitude(h, 2)) / 3.0);
  }
  return out;
}

/// Pearson correlation coefficient r_xy. Throws on length mismatch, n < 2, or
/// a constant series (zero denominator).
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("pearson: series lengths differ");
  const std::size_t n = x.size();
  if (n < 2) throw DomainError("pearson: need at least two observations");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DomainError("pearson: constant series");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

/// Aligned per-order amplitude series and the PV output they are screened against.
struct HarmonicSeries {
  std::map<int, std::vector<double>> amplitudes;
  std::vector<double> power;
};

inline std::map<int, double> correlation_table(const HarmonicSeries& s) {
  std::map<int, double> table;
  for (const auto& [order, amp] : s.amplitudes) {
    if (amp.size() != s.power.size())
      throw DomainError("correlation_table: order " + std::to_string(order) +
                        " series is not aligned with power");
    table[order] = pearson(amp, s.power);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Waveform files: CSV `t_s,ia,ib,ic` plus a JSON sidecar with sample_rate,
// fundamental and t0.

inline std::string waveform_sidecar_path(const std::string& csv_path) { return csv_path + ".json"; }

inline void save_waveform(const Waveform& w, const std::string& csv_path) {
  validate_waveform(w);
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw DataError("cannot write " + csv_path);
  out << "t_s,ia,ib,ic\n";
  for (std::size_t i = 0; i < w.size(); ++i)
    out << csv::format_exact(w.t0 + static_cast<double>(i) / w.sample_rate) << ','
        << csv::format_exact(w.phases[0][i]) << ',' << csv::format_exact(w.phases[1][i]) << ','
        << csv::format_exact(w.phases[2][i]) << '\n';
  std::ofstream side(waveform_sidecar_path(csv_path), std::ios::binary);
  nlohmann::ordered_json j;
  j["sample_rate"] = w.sample_rate;
  j["fundamental"] = w.fundamental;
  j["t0"] = w.t0;
  side << j.dump(2) << '\n';
}

inline Waveform load_waveform(const std::string& csv_path) {
  Waveform w;
  {
    std::ifstream side(waveform_sidecar_path(csv_path));
    if (!side) throw DataError("missing waveform sidecar " + waveform_sidecar_path(csv_path));
    const auto j = nlohmann::json::parse(side, nullptr, false);
    if (j.is_discarded() || !j.contains("sample_rate"))
      throw DataError("malformed waveform sidecar " + waveform_sidecar_path(csv_path));
    w.sample_rate = j.at("sample_rate").get<double>();
    w.fundamental = j.value("fundamental", 50.0);
    w.t0 = j.value("t0", 0.0);
  }
  csv::Reader reader(csv_path);
  const std::array<std::size_t, 3> cols{reader.require("ia"), reader.require("ib"),
                                        reader.require("ic")};
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    for (int p = 0; p < 3; ++p) {
      auto v = csv::parse_double(f[cols[p]]);
      if (!v)
        throw DataError(csv_path + ":" + std::to_string(reader.line_number()) + ": malformed current");
      w.phases[p].push_back(*v);
    }
  }
  validate_waveform(w);
  return w;
}

}  // namespace pvnowcast
