#pragma once

// Replicate-level evaluation: co-membership affinity, adjusted Rand index
// and pointwise quantile bands of scree curves.

#include "hcc/clustering.hpp"
#include "hcc/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <vector>

namespace hcc {

struct AffinityMatrix {
  Eigen::MatrixXd values;
  int replicates = 0;
};

/// Fraction of partitions placing channels i and j in the same cluster.
inline AffinityMatrix affinity(const std::vector<Partition>& partitions) {
  if (partitions.empty()) throw std::invalid_argument("affinity needs at least one partition");
  const std::size_t n = partitions.front().size();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Index>(n), static_cast<Index>(n));
  for (auto& p : partitions) {
    if (p.size() != n) throw std::invalid_argument("partitions cover different channel counts");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (p.together(i, j)) acc(static_cast<Index>(i), static_cast<Index>(j)) += 1.0;
  }
  acc /= static_cast<double>(partitions.size());
  return {std::move(acc), static_cast<int>(partitions.size())};
}

/// Adjusted Rand index. Degenerate cases where the expected and maximum
/// index coincide (e.g. two all-singleton partitions) score 1 when the
/// groupings agree and 0 otherwise.
inline double agreement(const Partition& p, const Partition& q) {
  if (p.size() != q.size()) throw std::invalid_argument("partitions cover different channel counts");
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  std::map<std::pair<int, int>, double> table;
  std::vector<double> rows(static_cast<std::size_t>(p.k()), 0.0), cols(static_cast<std::size_t>(q.k()), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    table[{p[i], q[i]}] += 1.0;
    rows[static_cast<std::size_t>(p[i])] += 1.0;
    cols[static_cast<std::size_t>(q[i])] += 1.0;
  }
  double index = 0.0, a = 0.0, b = 0.0;
  for (auto& [cell, count] : table) index += choose2(count);
  for (double r : rows) a += choose2(r);
  for (double c : cols) b += choose2(c);
  double expected = a * b / choose2(static_cast<double>(p.size()));
  double maximum = 0.5 * (a + b);
  if (maximum - expected == 0.0) return p.same_grouping(q) ? 1.0 : 0.0;
  return (index - expected) / (maximum - expected);
}

struct ScreeBand {
  std::vector<int> k;
  std::vector<double> levels;
  std::vector<std::vector<double>> quantiles;  // [level][k index]
};

namespace detail {

// Linear interpolation between order statistics (type 7).
inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace detail

/// Pointwise quantiles across replicate scree curves.
inline ScreeBand scree_band(const std::vector<ScreeCurve>& curves, std::vector<double> levels = {0.1, 0.5, 0.9}) {
  if (curves.empty()) throw std::invalid_argument("scree band needs at least one curve");
  for (auto& c : curves)
    if (c.d.size() != curves.front().d.size()) throw std::invalid_argument("scree curves differ in length");
  std::sort(levels.begin(), levels.end());
  ScreeBand band{curves.front().k, levels, {}};
  for (double q : levels) {
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile level outside [0, 1]");
    std::vector<double> row;
    for (std::size_t i = 0; i < band.k.size(); ++i) {
      std::vector<double> at;
      for (auto& c : curves) at.push_back(c.d[i]);
      row.push_back(detail::quantile(std::move(at), q));
    }
    band.quantiles.push_back(std::move(row));
  }
  return band;
}

/// Scree curve made of one quantile level, for elbow suggestions.
inline ScreeCurve band_curve(const ScreeBand& band, std::size_t level) {
  return ScreeCurve{band.k, band.quantiles.at(level)};
}

inline nlohmann::json to_json(const AffinityMatrix& a, const std::vector<std::string>& labels = {}) {
  std::vector<std::vector<double>> rows;
  for (Index r = 0; r < a.values.rows(); ++r) {
    rows.emplace_back();
    for (Index c = 0; c < a.values.cols(); ++c) rows.back().push_back(a.values(r, c));
  }
  return {{"replicates", a.replicates}, {"labels", labels}, {"values", rows}};
}

inline void write_csv(std::ostream& out, const AffinityMatrix& a, const std::vector<std::string>& labels = {}) {
  auto name = [&](Index i) { return labels.empty() ? std::to_string(i + 1) : labels[static_cast<std::size_t>(i)]; };
  out << "channel";
  for (Index c = 0; c < a.values.cols(); ++c) out << ',' << name(c);
  out << '\n';
  char buf[64];
  for (Index r = 0; r < a.values.rows(); ++r) {
    out << name(r);
    for (Index c = 0; c < a.values.cols(); ++c) {
      std::snprintf(buf, sizeof buf, ",%.6g", a.values(r, c));
      out << buf;
    }
    out << '\n';
  }
}

inline nlohmann::json to_json(const ScreeBand& b) {
  return {{"k", b.k}, {"levels", b.levels}, {"quantiles", b.quantiles}};
}

inline void write_csv(std::ostream& out, const ScreeBand& b) {
  out << 'k';
  for (double q : b.levels) out << ",q" << q;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < b.k.size(); ++i) {
    out << b.k[i];
    for (auto& row : b.quantiles) {
      std::snprintf(buf, sizeof buf, ",%.17g", row[i]);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace hcc
