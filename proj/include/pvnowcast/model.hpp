#pragma once

// Single-hidden-layer ReLU regressor (3 -> hidden -> 1) trained with Adam.
//
// ReLU is applied in every layer, including the output neuron. Targets are
// therefore scaled to [0, 1] with a min shift, while features are z-scored.
// Parameters live in one flat vector laid out as [W1 (hidden×3, row-major) |
// b1 | W2 | b2].

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvnowcast/digest.hpp"
#include "pvnowcast/error.hpp"
#include "pvnowcast/parallel.hpp"
#include "pvnowcast/random.hpp"
#include "pvnowcast/scenario.hpp"

namespace pvnowcast {

inline constexpr int kNumFeatures = 3;  // temperature, irradiance, h3 feature
using FeatureVector = std::array<double, kNumFeatures>;

struct Normalizer {
  FeatureVector feature_mean{0.0, 0.0, 0.0};
  FeatureVector feature_sd{1.0, 1.0, 1.0};
  double target_offset = 0.0;  // kW mapped to normalized 0
  double target_scale = 1.0;   // kW per normalized unit

  FeatureVector normalize(const FeatureVector& x) const {
    FeatureVector z;
    for (int k = 0; k < kNumFeatures; ++k) z[k] = (x[k] - feature_mean[k]) / feature_sd[k];
    return z;
  }
  double normalize_target(double y) const { return (y - target_offset) / target_scale; }
  double denormalize(double yn) const { return target_offset + target_scale * yn; }

  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

class MlpModel {
 public:
  MlpModel() : MlpModel(150) {}
  explicit MlpModel(int hidden) : hidden_(hidden), params_(parameter_count(hidden), 0.0) {
    if (hidden < 1) throw DomainError("hidden width must be >= 1");
  }

  static std::size_t parameter_count(int hidden) { return static_cast<std::size_t>(5 * hidden + 1); }

  int hidden() const { return hidden_; }
  std::array<int, 3> dims() const { return {kNumFeatures, hidden_, 1}; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> w1() { return params().subspan(0, 3 * h()); }
  std::span<const double> w1() const { return params().subspan(0, 3 * h()); }
  std::span<double> b1() { return params().subspan(3 * h(), h()); }
  std::span<const double> b1() const { return params().subspan(3 * h(), h()); }
  std::span<double> w2() { return params().subspan(4 * h(), h()); }
  std::span<const double> w2() const { return params().subspan(4 * h(), h()); }
  double& b2() { return params_.back(); }
  double b2() const { return params_.back(); }

  Normalizer normalizer;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  std::size_t h() const { return static_cast<std::size_t>(hidden_); }
  int hidden_;
  std::vector<double> params_;
};

/// He-uniform weights, zero hidden biases, output bias at mid-range.
inline constexpr double kInitialOutputBias = 0.5;

inline MlpModel init_model(int hidden, std::uint64_t seed) {
  MlpModel m(hidden);
  Rng rng = make_rng(seed, {0x1217u});
  std::uniform_real_distribution<double> u1(-std::sqrt(6.0 / kNumFeatures), std::sqrt(6.0 / kNumFeatures));
  std::uniform_real_distribution<double> u2(-std::sqrt(6.0 / hidden), std::sqrt(6.0 / hidden));
  for (double& w : m.w1()) w = u1(rng);
  for (double& w : m.w2()) w = u2(rng);
  m.b2() = kInitialOutputBias;
  return m;
}

namespace detail {

/// Normalized-space forward pass of one row.
inline double forward_normalized(const MlpModel& m, const FeatureVector& z) {
  const auto w1 = m.w1();
  const auto b1 = m.b1();
  const auto w2 = m.w2();
  double o = m.b2();
  for (int j = 0; j < m.hidden(); ++j) {
    const std::size_t r = 3 * static_cast<std::size_t>(j);
    const double a = w1[r] * z[0] + w1[r + 1] * z[1] + w1[r + 2] * z[2] + b1[j];
    if (a > 0.0) o += w2[j] * a;
  }
  return o > 0.0 ? o : 0.0;
}

/// Adds d(Σ e²)/dθ over rows[idx] into grad and returns Σ e², all in
/// normalized space. z is row-major n×3.
inline double accumulate_sse(const MlpModel& m, std::span<const double> z, std::span<const double> y,
                             std::span<const std::size_t> idx, std::span<double> grad,
                             std::vector<double>& act) {
  const int H = m.hidden();
  const auto w1 = m.w1();
  const auto b1 = m.b1();
  const auto w2 = m.w2();
  double* gw1 = grad.data();
  double* gb1 = gw1 + 3 * H;
  double* gw2 = gb1 + H;
  double& gb2 = grad[grad.size() - 1];
  act.resize(static_cast<std::size_t>(H));
  double sse = 0.0;
  double* h = act.data();
  for (std::size_t row : idx) {
    const double z0 = z[3 * row], z1 = z[3 * row + 1], z2 = z[3 * row + 2];
    for (int j = 0; j < H; ++j) {
      const double a = w1[3 * j] * z0 + w1[3 * j + 1] * z1 + w1[3 * j + 2] * z2 + b1[j];
      h[j] = a > 0.0 ? a : 0.0;
    }
    double o = m.b2();
    for (int j = 0; j < H; ++j) o += w2[j] * h[j];
    const double out = o > 0.0 ? o : 0.0;
    const double e = out - y[row];
    sse += e * e;
    if (!(o > 0.0)) continue;  // output ReLU inactive: no gradient flows
    const double d = 2.0 * e;
    gb2 += d;
    for (int j = 0; j < H; ++j) {
      const double da = h[j] > 0.0 ? d * w2[j] : 0.0;
      gw2[j] += d * h[j];
      gb1[j] += da;
      gw1[3 * j] += da * z0;
      gw1[3 * j + 1] += da * z1;
      gw1[3 * j + 2] += da * z2;
    }
  }
  return sse;
}

inline constexpr std::size_t kChunkRows = 2048;

/// Mean squared error and its gradient over rows[idx]. Rows are reduced in
/// fixed chunks merged in chunk order, so results do not depend on threads.
inline double mse_and_grad(const MlpModel& m, std::span<const double> z, std::span<const double> y,
                           std::span<const std::size_t> idx, std::vector<double>* grad) {
  const std::size_t n = idx.size();
  const std::size_t chunks = (n + kChunkRows - 1) / kChunkRows;
  const std::size_t P = m.params().size();
  std::vector<double> partial_grad(grad ? chunks * P : P, 0.0);
  std::vector<double> partial_sse(chunks, 0.0);
  parallel_for(chunks, [&](std::size_t c) {
    std::vector<double> act;
    const std::size_t b = c * kChunkRows, e = std::min(n, b + kChunkRows);
    if (grad) {
      partial_sse[c] = accumulate_sse(m, z, y, idx.subspan(b, e - b),
                                      std::span<double>(partial_grad).subspan(c * P, P), act);
    } else {
      const int H = m.hidden();
      const auto w1 = m.w1();
      const auto b1 = m.b1();
      const auto w2 = m.w2();
      act.resize(static_cast<std::size_t>(H));
      double* h = act.data();
      double s = 0.0;
      for (std::size_t i = b; i < e; ++i) {
        const std::size_t r = idx[i];
        const double z0 = z[3 * r], z1 = z[3 * r + 1], z2 = z[3 * r + 2];
        for (int j = 0; j < H; ++j) {
          const double a = w1[3 * j] * z0 + w1[3 * j + 1] * z1 + w1[3 * j + 2] * z2 + b1[j];
          h[j] = a > 0.0 ? a : 0.0;
        }
        double o = m.b2();
        for (int j = 0; j < H; ++j) o += w2[j] * h[j];
        const double err = (o > 0.0 ? o : 0.0) - y[r];
        s += err * err;
      }
      partial_sse[c] = s;
    }
  });
  double sse = 0.0;
  for (double s : partial_sse) sse += s;
  if (grad) {
    grad->assign(P, 0.0);
    for (std::size_t c = 0; c < chunks; ++c)
      for (std::size_t k = 0; k < P; ++k) (*grad)[k] += partial_grad[c * P + k];
    for (double& g : *grad) g /= static_cast<double>(n);
  }
  return sse / static_cast<double>(n);
}

}  // namespace detail

/// Nowcast in kW for raw features (temperature °C, irradiance W/m², h3 A).
inline double forward(const MlpModel& m, const FeatureVector& x) {
  for (double v : x)
    if (!std::isfinite(v)) throw DomainError("forward: non-finite input feature");
  return m.normalizer.denormalize(detail::forward_normalized(m, m.normalizer.normalize(x)));
}

struct LossAndGrads {
  double mse = 0.0;          // normalized target space
  std::vector<double> grad;  // same layout as MlpModel::params()
};

/// MSE over a batch of raw rows and its exact gradient (ReLU'(0) = 0).
inline LossAndGrads loss_and_grads(const MlpModel& m, std::span<const FeatureVector> x,
                                   std::span<const double> y) {
  if (x.empty() || x.size() != y.size()) throw DomainError("loss_and_grads: empty or misaligned batch");
  std::vector<double> z(3 * x.size()), yn(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto zi = m.normalizer.normalize(x[i]);
    std::copy(zi.begin(), zi.end(), z.begin() + 3 * static_cast<std::ptrdiff_t>(i));
    yn[i] = m.normalizer.normalize_target(y[i]);
  }
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  LossAndGrads out;
  out.mse = detail::mse_and_grad(m, z, yn, idx, &out.grad);
  return out;
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long long step_count = 0;
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of params in place.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& s) {
  if (grads.size() != params.size()) throw DomainError("adam_step: gradient shape mismatch");
  if (s.m.empty()) s.m.assign(params.size(), 0.0);
  if (s.v.empty()) s.v.assign(params.size(), 0.0);
  if (s.m.size() != params.size() || s.v.size() != params.size())
    throw DomainError("adam_step: state shape mismatch");
  ++s.step_count;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    s.m[k] = s.beta1 * s.m[k] + (1.0 - s.beta1) * g;
    s.v[k] = s.beta2 * s.v[k] + (1.0 - s.beta2) * g * g;
    const double m_hat = s.m[k] / c1;
    const double v_hat = s.v[k] / c2;
    params[k] -= s.alpha * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

inline void adam_step(MlpModel& model, std::span<const double> grads, AdamState& s) {
  adam_step(model.params(), grads, s);
}

struct TrainConfig {
  int hidden = 150;
  int batch_size = 33000;
  int epochs = 500;
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double validation_fraction = 0.2;
  int patience = 25;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& c) {
  if (c.batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0))
    throw DomainError("validation_fraction must lie in (0, 1)");
  if (c.epochs < 0 || c.patience < 1 || c.hidden < 1) throw DomainError("invalid epochs/patience/hidden");
}

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  return {{"hidden", c.hidden},       {"batch_size", c.batch_size},
          {"epochs", c.epochs},       {"alpha", c.alpha},
          {"beta1", c.beta1},         {"beta2", c.beta2},
          {"epsilon", c.epsilon},     {"validation_fraction", c.validation_fraction},
          {"patience", c.patience},   {"seed", c.seed}};
}

inline std::string fingerprint(const TrainConfig& c) { return sha256_hex(to_json(c).dump()); }

struct EpochLog {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochLog> log;
  int best_epoch = 0;
  std::string config_fingerprint;
};

/// Fits feature z-scores and the target [min, max] range on the given rows.
inline Normalizer fit_normalizer(const Dataset& d, std::span<const std::size_t> rows) {
  if (rows.empty()) throw DomainError("cannot fit a normalizer on zero rows");
  Normalizer n;
  const std::array<const std::vector<double>*, 3> cols{&d.temperature, &d.irradiance, &d.h3_feature};
  static constexpr std::array<const char*, 3> names{"temperature", "irradiance", "h3_feature"};
  for (int k = 0; k < kNumFeatures; ++k) {
    double mean = 0.0;
    for (std::size_t r : rows) mean += (*cols[k])[r];
    mean /= static_cast<double>(rows.size());
    double var = 0.0;
    for (std::size_t r : rows) var += ((*cols[k])[r] - mean) * ((*cols[k])[r] - mean);
    const double sd = std::sqrt(var / static_cast<double>(rows.size()));
    if (!(sd > 0.0)) throw DomainError(std::string("degenerate dataset: constant feature '") + names[k] + "'");
    n.feature_mean[k] = mean;
    n.feature_sd[k] = sd;
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t r : rows) {
    lo = std::min(lo, d.power[r]);
    hi = std::max(hi, d.power[r]);
  }
  if (!(hi > lo)) throw DomainError("degenerate dataset: constant target");
  n.target_offset = lo;
  n.target_scale = hi - lo;
  return n;
}

/// Splits scenario ids into training and validation sets (scenario-level, seeded).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(const Dataset& d,
                                                                                const TrainConfig& cfg) {
  std::vector<int> ids(d.scenario_id.begin(), d.scenario_id.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 2) throw DomainError("training needs rows from at least two scenarios");
  Rng rng = make_rng(cfg.seed, {0x5B17u});
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(ids.size()))), 1,
      ids.size() - 1);
  const std::set<int> val_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
  for (std::size_t r = 0; r < d.rows(); ++r)
    (val_ids.contains(d.scenario_id[r]) ? out.second : out.first).push_back(r);
  return out;
}

/// Mini-batch Adam with a scenario-level validation split and early stopping;
/// returns the parameters of the best validation epoch.
inline TrainResult train(const Dataset& d, const TrainConfig& cfg) {
  validate(cfg);
  auto [train_rows, val_rows] = split_rows(d, cfg);

  TrainResult result{init_model(cfg.hidden, cfg.seed), {}, 0, fingerprint(cfg)};
  result.model.normalizer = fit_normalizer(d, train_rows);
  if (cfg.epochs == 0) return result;

  const Normalizer& norm = result.model.normalizer;
  std::vector<double> z(3 * d.rows()), y(d.rows());
  for (std::size_t r = 0; r < d.rows(); ++r) {
    const auto zr = norm.normalize({d.temperature[r], d.irradiance[r], d.h3_feature[r]});
    z[3 * r] = zr[0];
    z[3 * r + 1] = zr[1];
    z[3 * r + 2] = zr[2];
    y[r] = norm.normalize_target(d.power[r]);
  }

  MlpModel model = result.model;
  AdamState adam;
  adam.alpha = cfg.alpha;
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  adam.epsilon = cfg.epsilon;
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), train_rows.size());
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<double> grad;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng = make_rng(cfg.seed, {0xE90Cu, static_cast<std::uint64_t>(epoch)});
    std::shuffle(train_rows.begin(), train_rows.end(), rng);
    double sse = 0.0;
    for (std::size_t b = 0; b < train_rows.size(); b += batch) {
      const std::size_t e = std::min(train_rows.size(), b + batch);
      const std::span<const std::size_t> idx(train_rows.data() + b, e - b);
      sse += detail::mse_and_grad(model, z, y, idx, &grad) * static_cast<double>(idx.size());
      adam_step(model, grad, adam);
    }
    const double val = detail::mse_and_grad(model, z, y, val_rows, nullptr);
    result.log.push_back({epoch, sse / static_cast<double>(train_rows.size()), val});
    if (val < best) {
      best = val;
      since_best = 0;
      result.best_epoch = epoch;
      result.model = model;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Model file: versioned JSON.

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::ordered_json model_to_json(const MlpModel& m, const std::string& config_fingerprint = {}) {
  nlohmann::ordered_json j;
  j["format"] = "pvnowcast-mlp";
  j["version"] = kModelFormatVersion;
  const auto dims = m.dims();
  j["dims"] = {dims[0], dims[1], dims[2]};
  j["activation"] = "relu";
  j["w1"] = std::vector<double>(m.w1().begin(), m.w1().end());
  j["b1"] = std::vector<double>(m.b1().begin(), m.b1().end());
  j["w2"] = std::vector<double>(m.w2().begin(), m.w2().end());
  j["b2"] = m.b2();
  j["normalizer"] = {{"feature_order", {"temperature_c", "irradiance_wm2", "h3_feature_a"}},
                     {"feature_mean", m.normalizer.feature_mean},
                     {"feature_sd", m.normalizer.feature_sd},
                     {"target_offset", m.normalizer.target_offset},
                     {"target_scale", m.normalizer.target_scale}};
  j["train_config_fingerprint"] = config_fingerprint;
  return j;
}

inline MlpModel model_from_json(const nlohmann::json& j) {
  const auto fail = [](const std::string& what) {
    return ModelFormatError("model file (format version " + std::to_string(kModelFormatVersion) +
                            " expected): " + what);
  };
  try {
    if (j.value("format", std::string{}) != "pvnowcast-mlp") throw fail("not a pvnowcast-mlp model");
    if (j.at("version").get<int>() != kModelFormatVersion)
      throw fail("unsupported version " + std::to_string(j.at("version").get<int>()));
    const auto dims = j.at("dims").get<std::vector<int>>();
    if (dims.size() != 3 || dims[0] != kNumFeatures || dims[2] != 1 || dims[1] < 1)
      throw fail("dims must be [3, hidden, 1]");
    MlpModel m(dims[1]);
    const auto load = [&](const char* key, std::span<double> dst) {
      const auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != dst.size())
        throw fail(std::string("'") + key + "' has " + std::to_string(v.size()) + " values, expected " +
                   std::to_string(dst.size()));
      std::copy(v.begin(), v.end(), dst.begin());
    };
    load("w1", m.w1());
    load("b1", m.b1());
    load("w2", m.w2());
    m.b2() = j.at("b2").get<double>();
    const auto& n = j.at("normalizer");
    m.normalizer.feature_mean = n.at("feature_mean").get<FeatureVector>();
    m.normalizer.feature_sd = n.at("feature_sd").get<FeatureVector>();
    m.normalizer.target_offset = n.at("target_offset").get<double>();
    m.normalizer.target_scale = n.at("target_scale").get<double>();
    for (double sd : m.normalizer.feature_sd)
      if (!(sd > 0.0)) throw fail("normalizer feature_sd must be > 0");
    if (!(m.normalizer.target_scale > 0.0)) throw fail("normalizer target_scale must be > 0");
    for (double p : m.params())
      if (!std::isfinite(p)) throw fail("non-finite weight");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
}

inline void save_model(const MlpModel& m, const std::string& path, const std::string& config_fingerprint = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << model_to_json(m, config_fingerprint).dump(1) << '\n';
}

inline MlpModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ModelFormatError("model file is not valid JSON: " + path);
  return model_from_json(j);
}

inline void write_training_log(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,train_mse,val_mse\n";
  for (const auto& e : log)
    out << e.epoch << ',' << csv::format_exact(e.train_mse) << ',' << csv::format_exact(e.val_mse) << '\n';
}

}  // namespace pvnowcast
