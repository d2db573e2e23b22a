#pragma once

// Agglomerative clustering of channels: HCC (cluster coherence), the
// average/complete linkage baselines, and a spectral-shape baseline, plus
// scree extraction, k-cuts and the elbow suggestion.

#include "hcc/coherence.hpp"
#include "hcc/core.hpp"
#include "hcc/parallel.hpp"
#include "hcc/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <string>
#include <vector>

namespace hcc {

enum class Method { hcc_p1, hcc_p2, hac, hmc, spectral_baseline };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::hcc_p1: return "hcc-p1";
    case Method::hcc_p2: return "hcc-p2";
    case Method::hac: return "hac";
    case Method::hmc: return "hmc";
    case Method::spectral_baseline: return "spectral-baseline";
  }
  return "?";
}

/// Accepts the canonical names plus "hcc" (p = 1).
inline Method method_from_string(const std::string& s) {
  if (s == "hcc" || s == "hcc-p1") return Method::hcc_p1;
  if (s == "hcc-p2") return Method::hcc_p2;
  if (s == "hac") return Method::hac;
  if (s == "hmc") return Method::hmc;
  if (s == "spectral-baseline" || s == "baseline") return Method::spectral_baseline;
  throw std::invalid_argument("unknown method '" + s + "'");
}

struct MergeStep {
  int left = 0;   // cluster ids; singletons are 0..N-1, the i-th merge creates N+i
  int right = 0;
  int created = 0;
  double dissimilarity = 0.0;
  int clusters_after = 0;
  Partition membership;
};

struct MergeHistory {
  Method method = Method::hcc_p1;
  FrequencyBand band;
  int channels = 0;
  std::vector<std::string> labels;
  std::vector<MergeStep> steps;
  int clamped = 0;  // dissimilarities pulled back into [0, 1]
};

struct ScreeCurve {
  std::vector<int> k;
  std::vector<double> d;
};

namespace detail {

/// Generic agglomeration. `between(members_a, members_b)` returns the
/// dissimilarity between two clusters; `initial` holds singleton values.
template <class Between>
MergeHistory agglomerate(const Eigen::MatrixXd& initial, Between&& between, Method method, FrequencyBand band) {
  const int N = static_cast<int>(initial.rows());
  if (N < 2) throw DataError("clustering needs at least two channels");
  MergeHistory h;
  h.method = method;
  h.band = std::move(band);
  h.channels = N;

  const int slots = 2 * N - 1;
  Eigen::MatrixXd D = Eigen::MatrixXd::Constant(slots, slots, std::numeric_limits<double>::quiet_NaN());
  auto clamp = [&h](double v) {
    if (v < 0.0 || v > 1.0 || std::isnan(v)) {
      ++h.clamped;
      return std::isnan(v) ? 1.0 : std::clamp(v, 0.0, 1.0);
    }
    return v;
  };
  for (int a = 0; a < N; ++a)
    for (int b = a + 1; b < N; ++b) D(a, b) = D(b, a) = clamp(initial(a, b));

  std::map<int, std::vector<Index>> active;
  for (int i = 0; i < N; ++i) active[i] = {static_cast<Index>(i)};
  std::vector<int> owner(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) owner[static_cast<std::size_t>(i)] = i;

  for (int step = 0; step < N - 1; ++step) {
    // Strict comparison over ids in increasing order keeps the
    // lexicographically smallest pair on ties.
    int best_a = -1, best_b = -1;
    double best = std::numeric_limits<double>::infinity();
    for (auto ia = active.begin(); ia != active.end(); ++ia)
      for (auto ib = std::next(ia); ib != active.end(); ++ib) {
        double v = D(ia->first, ib->first);
        if (v < best) {
          best = v;
          best_a = ia->first;
          best_b = ib->first;
        }
      }

    const int created = N + step;
    std::vector<Index> merged = active[best_a];
    merged.insert(merged.end(), active[best_b].begin(), active[best_b].end());
    std::sort(merged.begin(), merged.end());
    active.erase(best_a);
    active.erase(best_b);
    for (Index c : merged) owner[static_cast<std::size_t>(c)] = created;

    std::vector<int> others;
    for (auto& [id, members] : active) others.push_back(id);
    std::vector<double> values(others.size());
    parallel_for(static_cast<std::ptrdiff_t>(others.size()), [&](std::ptrdiff_t i) {
      values[static_cast<std::size_t>(i)] = between(merged, active.at(others[static_cast<std::size_t>(i)]));
    });
    for (std::size_t i = 0; i < others.size(); ++i)
      D(created, others[i]) = D(others[i], created) = clamp(values[i]);
    active[created] = std::move(merged);

    h.steps.push_back({best_a, best_b, created, best, N - 1 - step, Partition::canonical(owner)});
  }
  return h;
}

}  // namespace detail

/// Hierarchical cluster coherence on `band`. Singletons start from
/// 1 - band-mean pairwise coherence; after every merge the new cluster's
/// dissimilarity to each other cluster is 1 - band-mean cluster coherence.
inline MergeHistory hcc(const SpectralField& field, const FrequencyBand& band, int p = 1) {
  if (field.kind != SpectralKind::coherence) throw std::invalid_argument("hcc expects a coherence field");
  if (p != 1 && p != 2) throw std::invalid_argument("cluster coherence order p must be 1 or 2");
  if (field.channels() < 2) throw DataError("clustering needs at least two channels");
  auto bins = field.require_band(band);
  std::vector<Eigen::MatrixXd> mats;
  mats.reserve(bins.size());
  for (auto j : bins) mats.push_back(field.mats[j].real());

  Eigen::MatrixXd initial = Eigen::MatrixXd::Ones(field.channels(), field.channels()) - integrate_band(field, band);
  auto between = [&](const std::vector<Index>& a, const std::vector<Index>& b) {
    ClusterPair pair(a, b);
    double acc = 0.0;
    for (auto& C : mats) acc += cluster_coherence(C, pair, p);
    return 1.0 - acc / static_cast<double>(mats.size());
  };
  return detail::agglomerate(initial, between, p == 1 ? Method::hcc_p1 : Method::hcc_p2, band);
}

enum class Linkage { average, complete };

/// Classic agglomeration on 1 - coherence of a band-integrated matrix.
/// Average linkage is HAC, complete linkage is HMC.
inline MergeHistory linkage_cluster(const Eigen::MatrixXd& band_matrix, Linkage linkage, FrequencyBand band = {}) {
  if (band_matrix.rows() != band_matrix.cols()) throw std::invalid_argument("coherence matrix is not square");
  if ((band_matrix - band_matrix.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("coherence matrix is not symmetric");
  Eigen::MatrixXd D = Eigen::MatrixXd::Ones(band_matrix.rows(), band_matrix.cols()) - band_matrix;
  auto between = [&](const std::vector<Index>& a, const std::vector<Index>& b) {
    double acc = 0.0, worst = 0.0;
    for (Index i : a)
      for (Index j : b) {
        acc += D(i, j);
        worst = std::max(worst, D(i, j));
      }
    return linkage == Linkage::average ? acc / static_cast<double>(a.size() * b.size()) : worst;
  };
  return detail::agglomerate(D, between, linkage == Linkage::average ? Method::hac : Method::hmc, std::move(band));
}

namespace detail {

inline Eigen::VectorXd unit_area(const Eigen::VectorXd& s) {
  double total = s.sum();
  if (!(total > 0.0)) throw DataError("auto-spectrum has no power");
  return s / total;
}

}  // namespace detail

/// Spectral-shape baseline: agglomerates on the total-variation distance
/// 0.5 * sum |f_a - f_b| between unit-area auto-spectra. A merged cluster's
/// spectrum is the mean of its members' unit-area spectra. This groups
/// channels with similar spectral shape regardless of their coherence.
/// `auto_spectra` is J x N (smoothed).
inline MergeHistory spectral_baseline(const Eigen::MatrixXd& auto_spectra, FrequencyBand band = {}) {
  const Index N = auto_spectra.cols();
  if (N < 2) throw DataError("clustering needs at least two channels");
  Eigen::MatrixXd shapes(auto_spectra.rows(), N);
  for (Index c = 0; c < N; ++c) shapes.col(c) = detail::unit_area(auto_spectra.col(c));
  auto pooled = [&](const std::vector<Index>& members) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(shapes.rows());
    for (Index c : members) s += shapes.col(c);
    return Eigen::VectorXd(s / static_cast<double>(members.size()));
  };
  Eigen::MatrixXd initial = Eigen::MatrixXd::Zero(N, N);
  for (Index a = 0; a < N; ++a)
    for (Index b = a + 1; b < N; ++b)
      initial(a, b) = initial(b, a) = 0.5 * (shapes.col(a) - shapes.col(b)).cwiseAbs().sum();
  auto between = [&](const std::vector<Index>& a, const std::vector<Index>& b) {
    return 0.5 * (pooled(a) - pooled(b)).cwiseAbs().sum();
  };
  return detail::agglomerate(initial, between, Method::spectral_baseline, std::move(band));
}

/// Baseline straight from data: Fejer smoothing with a GCV-selected span.
inline MergeHistory spectral_baseline(const TimeSeriesSet& ts) {
  auto pg = periodogram_matrix(ts);
  auto spans = legal_spans(default_span_grid(), pg.size());
  if (spans.empty()) throw DataError("series too short to smooth");
  auto kernel = fejer_kernel(select_span_gcv(pg, spans));
  auto h = spectral_baseline(smooth_columns(pg.diagonals(), kernel), FrequencyBand{0.0, ts.fs() / 2.0, "full"});
  h.labels = ts.labels();
  return h;
}

inline ScreeCurve scree(const MergeHistory& h) {
  ScreeCurve s;
  for (auto& st : h.steps) {
    s.k.push_back(st.clusters_after);
    s.d.push_back(st.dissimilarity);
  }
  return s;
}

/// Membership with exactly k clusters.
inline Partition cut(const MergeHistory& h, int k) {
  if (k < 1 || k > h.channels)
    throw std::out_of_range("k=" + std::to_string(k) + " outside 1.." + std::to_string(h.channels));
  if (k == h.channels) return Partition::singletons(static_cast<std::size_t>(h.channels));
  return h.steps[static_cast<std::size_t>(h.channels - 1 - k)].membership;
}

/// Elbow rule on the scree curve: the smallest k such that the merge taking
/// k clusters to k-1 raises the dissimilarity by more than `threshold` over
/// the previous merge. Dissimilarities live in [0, 1], so the threshold is a
/// fraction of the full dissimilarity range. Returns 1 when no jump qualifies.
inline int suggest_k(const ScreeCurve& s, double threshold = 0.15) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold must lie in (0, 1)");
  for (std::size_t i = s.d.size(); i-- > 1;)
    if (s.d[i] - s.d[i - 1] > threshold) return s.k[i] + 1;
  return 1;
}

// -- serialisation ----------------------------------------------------------

inline nlohmann::json to_json(const FrequencyBand& b) { return {{"lo", b.lo}, {"hi", b.hi}, {"name", b.name}}; }

inline FrequencyBand band_from_json(const nlohmann::json& j) {
  return FrequencyBand{j.at("lo").get<double>(), j.at("hi").get<double>(), j.value("name", std::string{})};
}

inline nlohmann::json to_json(const Partition& p, const std::vector<std::string>& labels = {}) {
  nlohmann::json j;
  j["k"] = p.k();
  j["assignment"] = p.assignment();
  auto clusters = nlohmann::json::array();
  for (int c = 0; c < p.k(); ++c) {
    auto members = nlohmann::json::array();
    for (Index i : p.members(c)) {
      if (labels.empty())
        members.push_back(i);
      else
        members.push_back(labels[static_cast<std::size_t>(i)]);
    }
    clusters.push_back(std::move(members));
  }
  j["clusters"] = std::move(clusters);
  return j;
}

inline Partition partition_from_json(const nlohmann::json& j) {
  return Partition(j.at("assignment").get<std::vector<int>>());
}

inline nlohmann::json to_json(const MergeHistory& h) {
  nlohmann::json j;
  j["method"] = to_string(h.method);
  j["band"] = to_json(h.band);
  j["channels"] = h.channels;
  j["labels"] = h.labels;
  j["clamped"] = h.clamped;
  auto steps = nlohmann::json::array();
  for (std::size_t i = 0; i < h.steps.size(); ++i) {
    auto& s = h.steps[i];
    steps.push_back({{"step", i + 1},
                     {"merged", {s.left, s.right}},
                     {"created", s.created},
                     {"dissimilarity", s.dissimilarity},
                     {"k", s.clusters_after},
                     {"membership", s.membership.assignment()}});
  }
  j["steps"] = std::move(steps);
  return j;
}

inline MergeHistory merge_history_from_json(const nlohmann::json& j) {
  MergeHistory h;
  h.method = method_from_string(j.at("method").get<std::string>());
  h.band = band_from_json(j.at("band"));
  h.channels = j.at("channels").get<int>();
  h.labels = j.value("labels", std::vector<std::string>{});
  h.clamped = j.value("clamped", 0);
  for (auto& s : j.at("steps")) {
    h.steps.push_back({s.at("merged").at(0).get<int>(), s.at("merged").at(1).get<int>(), s.at("created").get<int>(),
                       s.at("dissimilarity").get<double>(), s.at("k").get<int>(),
                       Partition(s.at("membership").get<std::vector<int>>())});
  }
  if (static_cast<int>(h.steps.size()) != h.channels - 1) throw DataError("merge history must have N-1 steps");
  return h;
}

inline nlohmann::json to_json(const ScreeCurve& s) { return {{"k", s.k}, {"d", s.d}}; }

inline void write_csv(std::ostream& out, const ScreeCurve& s) {
  out << "k,dissimilarity\n";
  char buf[64];
  for (std::size_t i = 0; i < s.k.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", s.k[i], s.d[i]);
    out << buf;
  }
}

/// Cluster-merging plot data: one row per channel, one column per k from N
/// down to 1, cells holding the channel's cluster id at that k.
inline void write_merge_plot_csv(std::ostream& out, const MergeHistory& h) {
  out << "channel";
  for (int k = h.channels; k >= 1; --k) out << ",k" << k;
  out << '\n';
  std::vector<Partition> cuts;
  for (int k = h.channels; k >= 1; --k) cuts.push_back(cut(h, k));
  for (int c = 0; c < h.channels; ++c) {
    out << (h.labels.empty() ? std::to_string(c + 1) : h.labels[static_cast<std::size_t>(c)]);
    for (auto& p : cuts) out << ',' << p[static_cast<std::size_t>(c)];
    out << '\n';
  }
}

}  // namespace hcc
