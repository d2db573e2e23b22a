#pragma once

// Seeded simulation designs: AR(2) latent oscillators mixed into observed
// channels, spatial mixing on a scalp layout, and eye-blink contamination.

#include "hcc/core.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace hcc {

/// An AR(2) oscillator with a unimodal spectral peak.
struct AR2Spec {
  double peak_hz = 10.0;
  double modulus = 0.95;  // root modulus r in (0, 1)
  double innovation_sd = 1.0;
};

/// phi1 = 2 r cos(2 pi peak / fs), phi2 = -r^2.
inline std::pair<double, double> ar2_coefficients(const AR2Spec& spec, double fs) {
  if (!(spec.peak_hz > 0.0) || !(spec.peak_hz < fs / 2.0))
    throw std::invalid_argument("AR(2) peak must lie strictly between 0 and the Nyquist frequency");
  if (!(spec.modulus > 0.0 && spec.modulus < 1.0)) throw std::invalid_argument("AR(2) root modulus must lie in (0, 1)");
  double phi1 = 2.0 * spec.modulus * std::cos(2.0 * std::numbers::pi * spec.peak_hz / fs);
  double phi2 = -spec.modulus * spec.modulus;
  return {phi1, phi2};
}

/// sigma^2 / |1 - phi1 e^{-i 2 pi w} - phi2 e^{-i 4 pi w}|^2 at w = hz / fs.
inline double ar2_spectrum(double phi1, double phi2, double sigma, double hz, double fs) {
  double w = 2.0 * std::numbers::pi * hz / fs;
  double re = 1.0 - phi1 * std::cos(w) - phi2 * std::cos(2.0 * w);
  double im = phi1 * std::sin(w) + phi2 * std::sin(2.0 * w);
  return sigma * sigma / (re * re + im * im);
}

/// Independent random stream `stream` derived from a master seed. Distinct
/// streams go through std::seed_seq so they share no engine state.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

/// Seed of replicate `index` in a batch started from `seed`.
inline std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t index) { return seed + index; }

inline constexpr int kBurnIn = 500;

/// T samples of a causal AR(2) after discarding the burn-in.
inline Eigen::VectorXd simulate_ar2(const AR2Spec& spec, double fs, Index T, std::mt19937_64& rng) {
  auto [phi1, phi2] = ar2_coefficients(spec, fs);
  std::normal_distribution<double> noise(0.0, spec.innovation_sd);
  Eigen::VectorXd out(T);
  double x1 = 0.0, x2 = 0.0;
  for (Index t = -kBurnIn; t < T; ++t) {
    double x = phi1 * x1 + phi2 * x2 + noise(rng);
    x2 = x1;
    x1 = x;
    if (t >= 0) out(t) = x;
  }
  return out;
}

/// X(t) = A Z(t) + eps(t) with independent AR(2) latents Z.
struct MixtureSpec {
  std::vector<AR2Spec> latents;
  Eigen::MatrixXd mixing;            // N x L
  std::vector<double> noise_sd;      // one per channel, or a single shared value
  Index samples = 1000;
  double fs = 100.0;
  std::uint64_t seed = 0;
  std::vector<std::string> labels;   // optional
};

/// Latent l draws from stream l, the noise of channel c from stream 1000 + c.
inline TimeSeriesSet simulate_mixture(const MixtureSpec& spec) {
  const Index L = static_cast<Index>(spec.latents.size());
  const Index N = spec.mixing.rows();
  if (spec.mixing.cols() != L)
    throw std::invalid_argument("mixing matrix has " + std::to_string(spec.mixing.cols()) + " columns for " +
                                std::to_string(L) + " latents");
  if (N < 1) throw std::invalid_argument("mixture needs at least one channel");
  if (spec.samples < 2) throw std::invalid_argument("mixture needs at least two samples");
  if (spec.noise_sd.size() != 1 && static_cast<Index>(spec.noise_sd.size()) != N)
    throw std::invalid_argument("noise_sd must have one entry or one per channel");

  Eigen::MatrixXd Z(L, spec.samples);
  for (Index l = 0; l < L; ++l) {
    auto rng = make_stream(spec.seed, static_cast<std::uint64_t>(l));
    Z.row(l) = simulate_ar2(spec.latents[static_cast<std::size_t>(l)], spec.fs, spec.samples, rng).transpose();
  }
  Eigen::MatrixXd X = spec.mixing * Z;
  for (Index c = 0; c < N; ++c) {
    double sd = spec.noise_sd.size() == 1 ? spec.noise_sd[0] : spec.noise_sd[static_cast<std::size_t>(c)];
    if (sd == 0.0) continue;
    auto rng = make_stream(spec.seed, 1000 + static_cast<std::uint64_t>(c));
    std::normal_distribution<double> eps(0.0, sd);
    for (Index t = 0; t < spec.samples; ++t) X(c, t) += eps(rng);
  }
  return TimeSeriesSet(std::move(X), spec.fs, spec.labels);
}

/// A[s][i] = exp(-||s - s_i|| / kappa) for every layout channel s and source s_i.
inline Eigen::MatrixXd spatial_mixing(const ChannelLayout& layout, const std::vector<std::string>& sources,
                                      double kappa = 1.0 / 3.0) {
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  std::vector<Point2> src;
  for (auto& name : sources) {
    auto p = layout.find(name);
    if (!p) throw std::invalid_argument("unknown source channel '" + name + "'");
    src.push_back(*p);
  }
  Eigen::MatrixXd A(static_cast<Index>(layout.size()), static_cast<Index>(sources.size()));
  Index r = 0;
  for (auto& [name, pos] : layout.entries()) {
    for (std::size_t i = 0; i < src.size(); ++i) A(r, static_cast<Index>(i)) = std::exp(-distance(pos, src[i]) / kappa);
    ++r;
  }
  return A;
}

/// Eye blinks as a difference of two gamma densities,
/// amplitude * (g(t; k1, theta1) - weight * g(t; k2, theta2)), t in seconds
/// after each onset, over a one-second support, plus white noise.
struct ArtifactSpec {
  std::vector<double> onsets;  // seconds
  double shape1 = 6.0, scale1 = 0.018;
  double shape2 = 10.0, scale2 = 0.02;
  double weight = 0.6;
  double amplitude = 1.0;
  double noise_sd = 0.0;
  double support = 1.0;  // seconds
  std::vector<std::string> target_channels;
};

inline double gamma_pdf(double t, double shape, double scale) {
  if (t <= 0.0) return 0.0;
  return std::exp((shape - 1.0) * std::log(t) - t / scale - std::lgamma(shape) - shape * std::log(scale));
}

/// Blink waveform for unit amplitude at `t` seconds after onset.
inline double blink_shape(const ArtifactSpec& s, double t) {
  return gamma_pdf(t, s.shape1, s.scale1) - s.weight * gamma_pdf(t, s.shape2, s.scale2);
}

/// Largest |blink_shape| over the support, on a fine grid.
inline double blink_peak(const ArtifactSpec& s) {
  double peak = 0.0;
  for (int i = 1; i <= 10000; ++i) peak = std::max(peak, std::abs(blink_shape(s, s.support * i / 10000.0)));
  return peak;
}

inline Eigen::VectorXd eyeblink_series(const ArtifactSpec& spec, Index T, double fs, std::uint64_t seed) {
  if (!std::isfinite(spec.amplitude)) throw std::invalid_argument("blink amplitude must be finite");
  const double duration = static_cast<double>(T) / fs;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(T);
  for (double onset : spec.onsets) {
    if (!(onset >= 0.0 && onset < duration))
      throw std::invalid_argument("blink onset " + std::to_string(onset) + " s is outside the recording");
    auto first = static_cast<Index>(std::ceil(onset * fs));
    for (Index t = first; t < T; ++t) {
      double dt = static_cast<double>(t) / fs - onset;
      if (dt >= spec.support) break;
      out(t) += spec.amplitude * blink_shape(spec, dt);
    }
  }
  if (spec.noise_sd > 0.0) {
    auto rng = make_stream(seed, 0);
    std::normal_distribution<double> eps(0.0, spec.noise_sd);
    for (Index t = 0; t < T; ++t) out(t) += eps(rng);
  }
  return out;
}

// -- paper designs -----------------------------------------------------------

struct ExperimentOptions {
  double modulus = 0.95;
  double innovation_sd = 1.0;
  double noise_sd = 1.0;
  Index samples = 1000;
  double fs = 100.0;
  bool contaminate = true;  // artifact design only
};

struct Experiment {
  std::string name;
  TimeSeriesSet data;
  Partition reference;
  FrequencyBand band;
  MixtureSpec mixture;
};

/// Dominant-loading grouping: each channel joins the latent with its
/// largest absolute mixing coefficient (first one on ties).
inline Partition dominant_loading(const Eigen::MatrixXd& A) {
  std::vector<int> a(static_cast<std::size_t>(A.rows()));
  for (Index r = 0; r < A.rows(); ++r) {
    Index best = 0;
    A.row(r).cwiseAbs().maxCoeff(&best);
    a[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return Partition::canonical(a);
}

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"exp1", "exp2-case1", "exp2-case2", "exp3", "exp4", "artifact", "illustration1"};
  return names;
}

namespace detail {

inline Eigen::MatrixXd rows_from(std::initializer_list<std::pair<int, std::vector<double>>> blocks) {
  int n = 0;
  std::size_t L = 0;
  for (auto& [count, row] : blocks) {
    n += count;
    L = row.size();
  }
  Eigen::MatrixXd A(n, static_cast<Index>(L));
  int r = 0;
  for (auto& [count, row] : blocks)
    for (int i = 0; i < count; ++i, ++r)
      for (std::size_t c = 0; c < L; ++c) A(r, static_cast<Index>(c)) = row[c];
  return A;
}

}  // namespace detail

/// Builds one replicate of a named simulation design with its ground-truth
/// grouping and analysis band.
inline Experiment experiment(const std::string& name, std::uint64_t seed, const ExperimentOptions& opt = {}) {
  auto ar2 = [&](double hz) { return AR2Spec{hz, opt.modulus, opt.innovation_sd}; };
  MixtureSpec m;
  m.samples = opt.samples;
  m.fs = opt.fs;
  m.seed = seed;
  m.noise_sd = {opt.noise_sd};
  FrequencyBand band;
  std::optional<ChannelLayout> layout;

  if (name == "exp1") {
    m.latents = {ar2(2.0), ar2(2.0)};
    m.mixing = detail::rows_from({{3, {1, 0}}, {3, {0, 1}}});
    band = FrequencyBand{0.0, 4.0, "delta"};
  } else if (name == "exp2-case1") {
    m.latents = {ar2(2.0), ar2(2.0)};
    m.mixing = detail::rows_from({{1, {1, 0}}, {1, {1, 0}}, {1, {.2, 0}}, {1, {0, 1}}, {1, {0, 1}}, {1, {0, .2}}});
    band = FrequencyBand{0.0, 4.0, "delta"};
  } else if (name == "exp2-case2") {
    m.latents = {ar2(2.0), ar2(2.0)};
    m.mixing = detail::rows_from({{1, {1, 0}}, {1, {.8, .2}}, {1, {.4, .1}}, {1, {0, 1}}, {1, {.2, .8}}, {1, {.3, .2}}});
    band = FrequencyBand{0.0, 4.0, "delta"};
  } else if (name == "exp3") {
    m.latents = {ar2(2.0), ar2(6.0), ar2(10.0), ar2(15.0), ar2(40.0)};
    m.mixing = detail::rows_from({{25, {1, .2, 0, 0, 0}},
                                  {25, {0, 1, 0, 0, 0}},
                                  {25, {0, .2, 1, 0, 0}},
                                  {25, {0, 0, 0, 1, 0}},
                                  {28, {0, 0, 0, 0, 1}}});
    band = FrequencyBand{4.0, 8.0, "theta"};
  } else if (name == "exp4") {
    layout = standard_1020_layout();
    m.latents = {ar2(9.0), ar2(9.0), ar2(10.0), ar2(10.0)};
    m.mixing = spatial_mixing(*layout, {"C3", "C4", "Pz", "Fz"});
    band = FrequencyBand{8.0, 12.0, "alpha"};
  } else if (name == "artifact") {
    layout = standard_1020_layout();
    m.latents = {ar2(9.0), ar2(9.0), ar2(10.0), ar2(5.0), ar2(5.0)};
    m.mixing = spatial_mixing(*layout, {"C3", "C4", "Pz", "Fp1", "Fp2"});
    band = FrequencyBand{4.0, 8.0, "theta"};
  } else if (name == "illustration1") {
    m.latents = {ar2(3.0), ar2(5.0), ar2(9.0)};
    m.mixing = detail::rows_from({{1, {1, .2, 0}}, {1, {1, .6, 0}}, {1, {.3, .7, .3}}});
    band = FrequencyBand{0.0, 8.0, "delta+theta"};
  } else {
    throw std::invalid_argument("unknown experiment '" + name + "'");
  }

  if (layout) {
    for (auto& [label, pos] : layout->entries()) m.labels.push_back(label);
  }
  auto ts = simulate_mixture(m);
  if (name == "artifact" && opt.contaminate) {
    // Blink peak = 10x the clean channel's standard deviation.
    ArtifactSpec blink;
    double duration = ts.duration();
    for (int i = 0; i < 4; ++i) blink.onsets.push_back((i + 0.5) * duration / 4.0);
    blink.target_channels = {"Fp1", "Fp2", "F7", "F8"};
    const double peak = blink_peak(blink);
    Eigen::MatrixXd X = ts.data();
    std::uint64_t stream = 0;
    for (auto& target : blink.target_channels) {
      Index c = *ts.channel_index(target);
      double mean = X.row(c).mean();
      double sd = std::sqrt((X.row(c).array() - mean).square().sum() / static_cast<double>(X.cols() - 1));
      ArtifactSpec s = blink;
      s.amplitude = 10.0 * sd / peak;
      s.noise_sd = 0.1 * sd;
      X.row(c) += eyeblink_series(s, ts.samples(), ts.fs(), seed * 7919 + 2000 + stream++).transpose();
    }
    ts = TimeSeriesSet(std::move(X), ts.fs(), ts.labels());
  }
  if (layout) ts = ts.with_layout(*layout);
  Partition reference = dominant_loading(m.mixing);
  return Experiment{name, std::move(ts), std::move(reference), std::move(band), std::move(m)};
}

// -- configuration -----------------------------------------------------------

inline nlohmann::json to_json(const MixtureSpec& m) {
  nlohmann::json j;
  auto latents = nlohmann::json::array();
  for (auto& l : m.latents)
    latents.push_back({{"peak_hz", l.peak_hz}, {"modulus", l.modulus}, {"innovation_sd", l.innovation_sd}});
  j["latents"] = std::move(latents);
  auto rows = nlohmann::json::array();
  for (Index r = 0; r < m.mixing.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.mixing.cols()));
    for (Index c = 0; c < m.mixing.cols(); ++c) row[static_cast<std::size_t>(c)] = m.mixing(r, c);
    rows.push_back(row);
  }
  j["mixing"] = std::move(rows);
  j["noise_sd"] = m.noise_sd;
  j["samples"] = m.samples;
  j["fs"] = m.fs;
  j["seed"] = m.seed;
  j["labels"] = m.labels;
  return j;
}

inline MixtureSpec mixture_from_json(const nlohmann::json& j) {
  MixtureSpec m;
  for (auto& l : j.at("latents"))
    m.latents.push_back({l.at("peak_hz").get<double>(), l.value("modulus", 0.95), l.value("innovation_sd", 1.0)});
  auto& rows = j.at("mixing");
  m.mixing.resize(static_cast<Index>(rows.size()), static_cast<Index>(m.latents.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.latents.size()) throw DataError("mixing row " + std::to_string(r) + " has the wrong length");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m.mixing(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c].get<double>();
  }
  auto noise = j.value("noise_sd", nlohmann::json(1.0));
  m.noise_sd = noise.is_array() ? noise.get<std::vector<double>>() : std::vector<double>{noise.get<double>()};
  m.samples = j.value("samples", Index{1000});
  m.fs = j.value("fs", 100.0);
  m.seed = j.value("seed", std::uint64_t{0});
  m.labels = j.value("labels", std::vector<std::string>{});
  return m;
}

inline ExperimentOptions experiment_options_from_json(const nlohmann::json& j) {
  ExperimentOptions o;
  o.modulus = j.value("modulus", o.modulus);
  o.innovation_sd = j.value("innovation_sd", o.innovation_sd);
  o.noise_sd = j.value("noise_sd", o.noise_sd);
  o.samples = j.value("samples", o.samples);
  o.fs = j.value("fs", o.fs);
  o.contaminate = j.value("contaminate", o.contaminate);
  return o;
}

inline nlohmann::json to_json(const ExperimentOptions& o) {
  return {{"modulus", o.modulus},   {"innovation_sd", o.innovation_sd}, {"noise_sd", o.noise_sd},
          {"samples", o.samples},   {"fs", o.fs},                       {"contaminate", o.contaminate}};
}

}  // namespace hcc
