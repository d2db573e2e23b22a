#pragma once

// Data -> spectral estimate -> merge history, shared by the CLI, the HTTP
// service and the experiment harnesses so they all produce identical output.

#include "hcc/clustering.hpp"
#include "hcc/core.hpp"
#include "hcc/spectral.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace hcc {

struct SpectralOptions {
  KernelFamily family = KernelFamily::fejer;
  std::optional<int> span;  // unset: GCV over `grid`
  std::vector<int> grid = default_span_grid();
};

struct SpectralEstimate {
  SpectralField smoothed;
  SpectralField coherence;
  int span = 0;
};

inline SpectralEstimate estimate_spectra(const TimeSeriesSet& ts, const SpectralOptions& opt = {}) {
  auto pg = periodogram_matrix(ts);
  int span = 0;
  if (opt.span) {
    span = *opt.span;
  } else {
    auto spans = legal_spans(opt.grid, pg.size());
    if (spans.empty()) throw DataError("series of " + std::to_string(ts.samples()) + " samples is too short to smooth");
    span = select_span_gcv(pg, spans, opt.family);
  }
  SpectralEstimate est;
  est.span = span;
  est.smoothed = smooth(pg, make_kernel(opt.family, span));
  pg.mats.clear();
  pg.mats.shrink_to_fit();
  est.coherence = coherence_field(est.smoothed);
  return est;
}

inline void check_band(const FrequencyBand& band, double fs) {
  if (!(band.lo >= 0.0 && band.hi > band.lo)) throw DataError("invalid band " + band.describe());
  if (band.hi > fs / 2.0 + 1e-9) throw DataError("band " + band.describe() + " extends past the Nyquist frequency");
}

/// Also requires at least one Fourier frequency j*fs/T (j = 1..T/2) inside the band.
inline void check_band(const FrequencyBand& band, double fs, Index samples) {
  check_band(band, fs);
  for (Index j = 1; j <= samples / 2; ++j)
    if (band.contains(static_cast<double>(j) * fs / static_cast<double>(samples))) return;
  throw DataError("band " + band.describe() + " contains no Fourier frequency for " + std::to_string(samples) +
                  "-sample segments");
}

/// Canonical JSON text shared by every writer so CLI files and HTTP bodies match byte for byte.
inline std::string json_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

/// Runs one clustering method on a prepared estimate.
inline MergeHistory run_method(const SpectralEstimate& est, const std::vector<std::string>& labels, Method method,
                               const FrequencyBand& band) {
  MergeHistory h;
  switch (method) {
    case Method::hcc_p1: h = hcc(est.coherence, band, 1); break;
    case Method::hcc_p2: h = hcc(est.coherence, band, 2); break;
    case Method::hac: h = linkage_cluster(integrate_band(est.coherence, band), Linkage::average, band); break;
    case Method::hmc: h = linkage_cluster(integrate_band(est.coherence, band), Linkage::complete, band); break;
    case Method::spectral_baseline:
      h = spectral_baseline(est.smoothed.diagonals(), FrequencyBand{0.0, est.smoothed.fs / 2.0, "full"});
      break;
  }
  h.labels = labels;
  return h;
}

inline MergeHistory cluster_series(const TimeSeriesSet& ts, Method method, const FrequencyBand& band,
                                   const SpectralOptions& opt = {}) {
  if (method != Method::spectral_baseline) check_band(band, ts.fs(), ts.samples());
  return run_method(estimate_spectra(ts, opt), ts.labels(), method, band);
}

/// Scree points with the elbow suggestion.
inline nlohmann::json scree_document(const MergeHistory& h) {
  auto s = scree(h);
  auto j = to_json(s);
  j["suggested_k"] = suggest_k(s);
  return j;
}

/// The k-cluster cut, labelled, with the method and band that produced it.
inline nlohmann::json partition_document(const MergeHistory& h, int k) {
  auto j = to_json(cut(h, k), h.labels);
  j["method"] = to_string(h.method);
  j["band"] = to_json(h.band);
  j["suggested_k"] = suggest_k(scree(h));
  return j;
}

}  // namespace hcc
