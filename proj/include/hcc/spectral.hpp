#pragma once

// Spectral matrix estimation: periodogram matrices, kernel smoothing with a
// GCV-selected span, and the squared-coherence field derived from them.

#include "hcc/core.hpp"
#include "hcc/parallel.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <nlohmann/json.hpp>
#include <ostream>
#include <string>
#include <vector>

namespace hcc {

enum class SpectralKind { raw_periodogram, smoothed_spectrum, coherence };

inline const char* to_string(SpectralKind k) {
  switch (k) {
    case SpectralKind::raw_periodogram: return "raw-periodogram";
    case SpectralKind::smoothed_spectrum: return "smoothed-spectrum";
    case SpectralKind::coherence: return "coherence";
  }
  return "?";
}

inline SpectralKind spectral_kind_from_string(const std::string& s) {
  if (s == "raw-periodogram") return SpectralKind::raw_periodogram;
  if (s == "smoothed-spectrum") return SpectralKind::smoothed_spectrum;
  if (s == "coherence") return SpectralKind::coherence;
  throw DataError("unknown spectral field kind '" + s + "'");
}

enum class KernelFamily { daniell, fejer };

inline const char* to_string(KernelFamily f) {
  return f == KernelFamily::daniell ? "daniell" : "fejer";
}

inline KernelFamily kernel_family_from_string(const std::string& s) {
  if (s == "daniell") return KernelFamily::daniell;
  if (s == "fejer") return KernelFamily::fejer;
  throw std::invalid_argument("unknown kernel family '" + s + "'");
}

/// Symmetric nonnegative weights over lags -span..span, summing to one.
struct SmoothingKernel {
  KernelFamily family = KernelFamily::fejer;
  int span = 0;
  std::vector<double> weights;  // weights[span + lag]

  double at(int lag) const { return weights[static_cast<std::size_t>(span + lag)]; }
  double center() const { return at(0); }
};

inline SmoothingKernel daniell_kernel(int m) {
  if (m < 1) throw std::invalid_argument("kernel span must be at least 1");
  SmoothingKernel k{KernelFamily::daniell, m, {}};
  k.weights.assign(static_cast<std::size_t>(2 * m + 1), 1.0 / (2.0 * m + 1.0));
  return k;
}

/// Triangular-squared weights (1 - |k|/(m+1))^2, normalised to unit mass.
inline SmoothingKernel fejer_kernel(int m) {
  if (m < 1) throw std::invalid_argument("kernel span must be at least 1");
  SmoothingKernel k{KernelFamily::fejer, m, {}};
  k.weights.resize(static_cast<std::size_t>(2 * m + 1));
  double total = 0.0;
  for (int lag = -m; lag <= m; ++lag) {
    double tri = 1.0 - std::abs(lag) / (m + 1.0);
    k.weights[static_cast<std::size_t>(lag + m)] = tri * tri;
    total += tri * tri;
  }
  for (auto& w : k.weights) w /= total;
  return k;
}

inline SmoothingKernel make_kernel(KernelFamily family, int m) {
  return family == KernelFamily::daniell ? daniell_kernel(m) : fejer_kernel(m);
}

/// Per-frequency N x N matrices at the Fourier frequencies j*fs/T, j = 1..floor(T/2).
struct SpectralField {
  std::vector<double> freqs;  // Hz
  std::vector<Eigen::MatrixXcd> mats;
  SpectralKind kind = SpectralKind::raw_periodogram;
  double fs = 1.0;
  Index samples = 0;  // series length T the field was estimated from
  // Smoothing metadata; span 0 for raw periodograms.
  KernelFamily family = KernelFamily::fejer;
  int span = 0;

  Index channels() const { return mats.empty() ? 0 : mats.front().rows(); }
  std::size_t size() const { return freqs.size(); }

  std::vector<std::size_t> band_bins(const FrequencyBand& band) const {
    std::vector<std::size_t> bins;
    for (std::size_t j = 0; j < freqs.size(); ++j)
      if (band.contains(freqs[j])) bins.push_back(j);
    return bins;
  }

  /// Bins of `band`, failing when the band holds no Fourier frequency.
  std::vector<std::size_t> require_band(const FrequencyBand& band) const {
    auto bins = band_bins(band);
    if (bins.empty())
      throw DataError("band " + band.describe() + " contains no Fourier frequency (resolution " +
                      std::to_string(samples > 0 ? fs / static_cast<double>(samples) : 0.0) +
                      " Hz)");
    return bins;
  }

  /// Diagonal as a J x N real matrix (auto-spectra for spectral kinds).
  Eigen::MatrixXd diagonals() const {
    Eigen::MatrixXd d(static_cast<Index>(size()), channels());
    for (std::size_t j = 0; j < size(); ++j) d.row(static_cast<Index>(j)) = mats[j].diagonal().real().transpose();
    return d;
  }
};

/// Discrete Fourier coefficients of the mean-centred channels at bins
/// 1..floor(T/2), as a J x N complex matrix.
inline Eigen::MatrixXcd fourier_coefficients(const TimeSeriesSet& ts) {
  const Index N = ts.channels();
  const Index T = ts.samples();
  const Index J = T / 2;
  Eigen::MatrixXcd d(J, N);
  Eigen::FFT<double> fft;
  std::vector<double> x(static_cast<std::size_t>(T));
  std::vector<std::complex<double>> X;
  for (Index c = 0; c < N; ++c) {
    double mean = ts.data().row(c).mean();
    for (Index t = 0; t < T; ++t) x[static_cast<std::size_t>(t)] = ts.data()(c, t) - mean;
    fft.fwd(X, x);
    for (Index j = 0; j < J; ++j) d(j, c) = X[static_cast<std::size_t>(j + 1)];
  }
  return d;
}

/// I(w_j) = d(w_j) d(w_j)* / T at every positive Fourier frequency.
inline SpectralField periodogram_matrix(const TimeSeriesSet& ts) {
  const Index T = ts.samples();
  Eigen::MatrixXcd d = fourier_coefficients(ts);
  SpectralField f;
  f.kind = SpectralKind::raw_periodogram;
  f.fs = ts.fs();
  f.samples = T;
  const Index J = d.rows();
  f.freqs.resize(static_cast<std::size_t>(J));
  f.mats.resize(static_cast<std::size_t>(J));
  for (Index j = 0; j < J; ++j) {
    f.freqs[static_cast<std::size_t>(j)] = static_cast<double>(j + 1) * ts.fs() / static_cast<double>(T);
    Eigen::VectorXcd dj = d.row(j).transpose();
    Eigen::MatrixXcd m = dj * dj.adjoint() / static_cast<double>(T);
    for (Index c = 0; c < m.rows(); ++c) m(c, c) = std::complex<double>(m(c, c).real(), 0.0);
    f.mats[static_cast<std::size_t>(j)] = std::move(m);
  }
  return f;
}

namespace detail {

// Half-sample reflection at both ends: bin 0 maps to bin 1, bin J+1 to bin J.
inline std::size_t reflect_bin(long i, long J) {
  while (i < 0 || i >= J) {
    if (i < 0) i = -1 - i;
    if (i >= J) i = 2 * J - 1 - i;
  }
  return static_cast<std::size_t>(i);
}

inline void check_span(const SmoothingKernel& k, std::size_t J) {
  if (k.span < 1) throw std::invalid_argument("kernel span must be at least 1");
  if (static_cast<std::size_t>(2 * k.span + 1) > J)
    throw DataError("smoothing span " + std::to_string(k.span) + " is too large for " +
                    std::to_string(J) + " Fourier frequencies");
}

}  // namespace detail

/// Kernel-weighted average of neighbouring periodogram matrices.
inline SpectralField smooth(const SpectralField& pg, const SmoothingKernel& kernel) {
  if (pg.kind != SpectralKind::raw_periodogram)
    throw std::invalid_argument("smooth expects a raw periodogram field");
  const std::size_t J = pg.size();
  detail::check_span(kernel, J);
  SpectralField out;
  out.kind = SpectralKind::smoothed_spectrum;
  out.freqs = pg.freqs;
  out.fs = pg.fs;
  out.samples = pg.samples;
  out.family = kernel.family;
  out.span = kernel.span;
  out.mats.resize(J);
  parallel_for(static_cast<std::ptrdiff_t>(J), [&](std::ptrdiff_t j) {
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(pg.channels(), pg.channels());
    for (int lag = -kernel.span; lag <= kernel.span; ++lag)
      acc += kernel.at(lag) * pg.mats[detail::reflect_bin(j + lag, static_cast<long>(J))];
    out.mats[static_cast<std::size_t>(j)] = std::move(acc);
  });
  return out;
}

/// Smooths each column of a J x N real matrix with reflection at the ends.
inline Eigen::MatrixXd smooth_columns(const Eigen::MatrixXd& values, const SmoothingKernel& kernel) {
  const auto J = static_cast<std::size_t>(values.rows());
  detail::check_span(kernel, J);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(values.rows(), values.cols());
  for (std::size_t j = 0; j < J; ++j)
    for (int lag = -kernel.span; lag <= kernel.span; ++lag)
      out.row(static_cast<Index>(j)) +=
          kernel.at(lag) * values.row(static_cast<Index>(detail::reflect_bin(static_cast<long>(j) + lag, static_cast<long>(J))));
  return out;
}

/// Gamma-deviance generalised cross-validation score of one kernel, pooled
/// over channels:
///   sum_{k,j} (r - log r - 1) / (J N (1 - W(0))^2),  r = I_k(w_j) / f_k(w_j).
inline double gcv_score(const Eigen::MatrixXd& auto_periodogram, const SmoothingKernel& kernel) {
  constexpr double floor = 1e-300;
  Eigen::MatrixXd smoothed = smooth_columns(auto_periodogram, kernel);
  double total = 0.0;
  for (Index j = 0; j < auto_periodogram.rows(); ++j)
    for (Index c = 0; c < auto_periodogram.cols(); ++c) {
      double raw = std::max(auto_periodogram(j, c), floor);
      double fit = std::max(smoothed(j, c), floor);
      double r = raw / fit;
      total += r - std::log(r) - 1.0;
    }
  double penalty = 1.0 - kernel.center();
  return total / (static_cast<double>(auto_periodogram.size()) * penalty * penalty);
}

/// Span minimising the GCV score; ties go to the smaller span.
inline int select_span_gcv(const SpectralField& pg, std::vector<int> candidates,
                           KernelFamily family = KernelFamily::fejer) {
  if (pg.kind != SpectralKind::raw_periodogram)
    throw std::invalid_argument("span selection expects a raw periodogram field");
  if (candidates.empty()) throw std::invalid_argument("no candidate spans");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  Eigen::MatrixXd diag = pg.diagonals();
  int best = candidates.front();
  double best_score = std::numeric_limits<double>::infinity();
  for (int m : candidates) {
    double s = gcv_score(diag, make_kernel(family, m));
    if (s < best_score) {
      best_score = s;
      best = m;
    }
  }
  return best;
}

/// Candidate spans from `grid` that fit J Fourier frequencies.
inline std::vector<int> legal_spans(const std::vector<int>& grid, std::size_t J) {
  std::vector<int> out;
  for (int m : grid)
    if (m >= 1 && static_cast<std::size_t>(2 * m + 1) <= J) out.push_back(m);
  return out;
}

inline const std::vector<int>& default_span_grid() {
  static const std::vector<int> grid{1, 2, 4, 8, 16, 32};
  return grid;
}

/// Squared coherence |f_kl|^2 / (f_kk f_ll) at every frequency; unit diagonal.
inline SpectralField coherence_field(const SpectralField& spec) {
  if (spec.kind != SpectralKind::smoothed_spectrum)
    throw std::invalid_argument("coherence requires a smoothed spectral field");
  const Index N = spec.channels();
  for (std::size_t j = 0; j < spec.size(); ++j)
    for (Index c = 0; c < N; ++c)
      if (!(spec.mats[j](c, c).real() > 0.0))
        throw DataError("auto-spectrum of channel " + std::to_string(c) + " is zero at " +
                        std::to_string(spec.freqs[j]) + " Hz");
  SpectralField out;
  out.kind = SpectralKind::coherence;
  out.freqs = spec.freqs;
  out.fs = spec.fs;
  out.samples = spec.samples;
  out.family = spec.family;
  out.span = spec.span;
  out.mats.resize(spec.size());
  parallel_for(static_cast<std::ptrdiff_t>(spec.size()), [&](std::ptrdiff_t jj) {
    const auto& S = spec.mats[static_cast<std::size_t>(jj)];
    Eigen::MatrixXcd C(N, N);
    for (Index k = 0; k < N; ++k) {
      C(k, k) = 1.0;
      for (Index l = k + 1; l < N; ++l) {
        double v = std::norm(S(k, l)) / (S(k, k).real() * S(l, l).real());
        v = std::clamp(v, 0.0, 1.0);
        C(k, l) = v;
        C(l, k) = v;
      }
    }
    out.mats[static_cast<std::size_t>(jj)] = std::move(C);
  });
  return out;
}

/// Real part of a coherence field restricted to one bin.
inline Eigen::MatrixXd coherence_at(const SpectralField& field, std::size_t bin) {
  return field.mats[bin].real();
}

/// Mean coherence matrix over the Fourier frequencies in [lo, hi).
inline Eigen::MatrixXd integrate_band(const SpectralField& field, const FrequencyBand& band) {
  if (field.kind != SpectralKind::coherence)
    throw std::invalid_argument("integrate_band expects a coherence field");
  auto bins = field.require_band(band);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(field.channels(), field.channels());
  for (auto j : bins) acc += field.mats[j].real();
  acc /= static_cast<double>(bins.size());
  acc.diagonal().setOnes();
  return acc;
}

// -- serialisation ----------------------------------------------------------

inline nlohmann::json to_json(const SpectralField& f) {
  nlohmann::json j;
  j["kind"] = to_string(f.kind);
  j["fs"] = f.fs;
  j["samples"] = f.samples;
  j["kernel"] = {{"family", to_string(f.family)}, {"span", f.span}};
  j["channels"] = f.channels();
  j["freqs"] = f.freqs;
  auto mats = nlohmann::json::array();
  for (auto& m : f.mats) {
    auto rows = nlohmann::json::array();
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) rows.push_back({m(r, c).real(), m(r, c).imag()});
    mats.push_back(std::move(rows));
  }
  j["matrices"] = std::move(mats);
  return j;
}

inline SpectralField spectral_field_from_json(const nlohmann::json& j) {
  SpectralField f;
  f.kind = spectral_kind_from_string(j.at("kind").get<std::string>());
  f.fs = j.at("fs").get<double>();
  f.samples = j.at("samples").get<Index>();
  f.family = kernel_family_from_string(j.at("kernel").at("family").get<std::string>());
  f.span = j.at("kernel").at("span").get<int>();
  f.freqs = j.at("freqs").get<std::vector<double>>();
  const auto N = j.at("channels").get<Index>();
  for (auto& flat : j.at("matrices")) {
    if (static_cast<Index>(flat.size()) != N * N) throw DataError("matrix size does not match channel count");
    Eigen::MatrixXcd m(N, N);
    for (Index r = 0; r < N; ++r)
      for (Index c = 0; c < N; ++c) {
        auto& z = flat[static_cast<std::size_t>(r * N + c)];
        m(r, c) = {z.at(0).get<double>(), z.at(1).get<double>()};
      }
    f.mats.push_back(std::move(m));
  }
  if (f.mats.size() != f.freqs.size()) throw DataError("frequency and matrix counts differ");
  return f;
}

namespace detail {
constexpr char kFieldMagic[8] = {'H', 'C', 'C', 'S', 'P', 'F', '0', '1'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("truncated spectral field file");
  return v;
}
}  // namespace detail

/// Binary container: magic, kind, family, span, fs, T, N, J, freqs, then J
/// row-major complex matrices as (re, im) doubles. Host byte order.
inline void write_binary(std::ostream& out, const SpectralField& f) {
  out.write(detail::kFieldMagic, sizeof detail::kFieldMagic);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.kind));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.family));
  detail::put<std::int32_t>(out, f.span);
  detail::put<double>(out, f.fs);
  detail::put<std::int64_t>(out, f.samples);
  detail::put<std::int64_t>(out, f.channels());
  detail::put<std::int64_t>(out, static_cast<std::int64_t>(f.size()));
  for (double hz : f.freqs) detail::put(out, hz);
  for (auto& m : f.mats)
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) {
        detail::put(out, m(r, c).real());
        detail::put(out, m(r, c).imag());
      }
}

inline SpectralField read_binary(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, detail::kFieldMagic, sizeof magic) != 0)
    throw DataError("not a spectral field file");
  SpectralField f;
  auto kind = detail::get<std::uint32_t>(in);
  auto family = detail::get<std::uint32_t>(in);
  if (kind > 2 || family > 1) throw DataError("corrupt spectral field header");
  f.kind = static_cast<SpectralKind>(kind);
  f.family = static_cast<KernelFamily>(family);
  f.span = detail::get<std::int32_t>(in);
  f.fs = detail::get<double>(in);
  f.samples = detail::get<std::int64_t>(in);
  auto N = detail::get<std::int64_t>(in);
  auto J = detail::get<std::int64_t>(in);
  if (N < 0 || J < 0) throw DataError("corrupt spectral field header");
  for (std::int64_t j = 0; j < J; ++j) f.freqs.push_back(detail::get<double>(in));
  for (std::int64_t j = 0; j < J; ++j) {
    Eigen::MatrixXcd m(N, N);
    for (Index r = 0; r < N; ++r)
      for (Index c = 0; c < N; ++c) {
        double re = detail::get<double>(in);
        double im = detail::get<double>(in);
        m(r, c) = {re, im};
      }
    f.mats.push_back(std::move(m));
  }
  return f;
}

}  // namespace hcc
