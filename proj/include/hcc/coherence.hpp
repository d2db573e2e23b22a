#pragma once

// Dependence between two disjoint groups of channels at one frequency:
// cluster coherence plus the average, minimum and block coherence
// comparators.

#include "hcc/core.hpp"
#include "hcc/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <nlohmann/json.hpp>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace hcc {

/// Two disjoint, nonempty sets of channel indices. Each side is kept sorted so
/// every measure is exactly invariant to member order and to swapping sides.
class ClusterPair {
 public:
  ClusterPair(std::vector<Index> left, std::vector<Index> right)
      : left_(std::move(left)), right_(std::move(right)) {
    if (left_.empty() || right_.empty()) throw std::invalid_argument("cluster pair has an empty side");
    std::set<Index> seen;
    for (Index i : left_)
      if (i < 0 || !seen.insert(i).second) throw std::invalid_argument("invalid or repeated channel in cluster");
    for (Index i : right_)
      if (i < 0 || !seen.insert(i).second) throw std::invalid_argument("clusters overlap");
    std::sort(left_.begin(), left_.end());
    std::sort(right_.begin(), right_.end());
  }

  const std::vector<Index>& left() const { return left_; }
  const std::vector<Index>& right() const { return right_; }
  Index size() const { return static_cast<Index>(left_.size() + right_.size()); }

  ClusterPair swapped() const { return ClusterPair(right_, left_); }

  /// Sorted union of both sides.
  std::vector<Index> joint() const {
    std::vector<Index> all(left_);
    all.insert(all.end(), right_.begin(), right_.end());
    std::sort(all.begin(), all.end());
    return all;
  }

  void check_bounds(Index n) const {
    for (Index i : joint())
      if (i >= n) throw std::invalid_argument("channel index " + std::to_string(i) + " out of range");
  }

 private:
  std::vector<Index> left_;
  std::vector<Index> right_;
};

namespace detail {

template <class Mat>
Mat submatrix(const Mat& M, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  Mat out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      out(static_cast<Index>(r), static_cast<Index>(c)) = M(rows[r], cols[c]);
  return out;
}

inline std::vector<double> raw_eigenvalues(const Eigen::MatrixXd& M) {
  if (M.rows() == 1) return {M(0, 0)};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw DataError("eigenvalue solver did not converge");
  const auto& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

}  // namespace detail

/// Eigenvalues of a real symmetric PSD matrix, clamped at zero, divided by
/// `total` and sorted in descending order.
inline std::vector<double> normalized_sorted_eigenvalues(const Eigen::MatrixXd& M, double total) {
  if (M.rows() != M.cols()) throw std::invalid_argument("matrix is not square");
  if (!(total > 0.0)) throw std::invalid_argument("normalising total must be positive");
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-8) throw std::invalid_argument("matrix is not symmetric");
  auto ev = detail::raw_eigenvalues(M);
  for (auto& v : ev) v = std::max(v, 0.0) / total;
  std::sort(ev.begin(), ev.end(), std::greater<>());
  return ev;
}

namespace detail {

inline double lp_distance(const std::vector<double>& a, const std::vector<double>& b, int p) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = std::abs(a[i] - b[i]);
    acc += p == 1 ? d : d * d;
  }
  return p == 1 ? acc : std::sqrt(acc);
}

inline void check_p(int p) {
  if (p != 1 && p != 2) throw std::invalid_argument("cluster coherence order p must be 1 or 2");
}

}  // namespace detail

/// Cluster coherence between the two sides of `pair` for one real coherence
/// matrix C: the L^p distance between the sorted eigenvalues of the joint
/// submatrix and the pooled, re-sorted eigenvalues of its two diagonal
/// blocks, all normalised by the joint dimension n1 + n2.
inline double cluster_coherence(const Eigen::MatrixXd& C, const ClusterPair& pair, int p = 1) {
  detail::check_p(p);
  pair.check_bounds(C.rows());
  const auto total = static_cast<double>(pair.size());
  auto joint = normalized_sorted_eigenvalues(detail::submatrix(C, pair.joint(), pair.joint()), total);
  auto pooled = normalized_sorted_eigenvalues(detail::submatrix(C, pair.left(), pair.left()), total);
  auto right = normalized_sorted_eigenvalues(detail::submatrix(C, pair.right(), pair.right()), total);
  pooled.insert(pooled.end(), right.begin(), right.end());
  std::sort(pooled.begin(), pooled.end(), std::greater<>());
  return detail::lp_distance(joint, pooled, p);
}

enum class PairMeasure { cco_p1, cco_p2, average, minimum, block };

inline const char* to_string(PairMeasure m) {
  switch (m) {
    case PairMeasure::cco_p1: return "cco-p1";
    case PairMeasure::cco_p2: return "cco-p2";
    case PairMeasure::average: return "average";
    case PairMeasure::minimum: return "minimum";
    case PairMeasure::block: return "block";
  }
  return "?";
}

struct CoherenceCurve {
  std::vector<double> freqs;
  std::vector<double> values;
  PairMeasure measure = PairMeasure::cco_p1;

  /// Mean over the Fourier frequencies inside `band`.
  double band_mean(const FrequencyBand& band) const {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < freqs.size(); ++j)
      if (band.contains(freqs[j])) {
        acc += values[j];
        ++n;
      }
    if (n == 0) throw DataError("band " + band.describe() + " contains no Fourier frequency");
    return acc / static_cast<double>(n);
  }
};

/// Mean of the between-cluster block C_{1,2}.
inline double average_coherence(const Eigen::MatrixXd& C, const ClusterPair& pair) {
  pair.check_bounds(C.rows());
  return detail::submatrix(C, pair.left(), pair.right()).mean();
}

/// Minimum of the between-cluster block C_{1,2}.
inline double minimum_coherence(const Eigen::MatrixXd& C, const ClusterPair& pair) {
  pair.check_bounds(C.rows());
  return detail::submatrix(C, pair.left(), pair.right()).minCoeff();
}

/// 1 - det(S_joint) / (det(S_left) det(S_right)) on a spectral matrix. The
/// determinants are taken after scaling to unit diagonal, which leaves the
/// ratio unchanged and makes the singularity threshold scale-free.
inline double block_coherence(const Eigen::MatrixXcd& S, const ClusterPair& pair) {
  pair.check_bounds(S.rows());
  Eigen::MatrixXcd J = detail::submatrix(S, pair.joint(), pair.joint());
  Eigen::VectorXd scale(J.rows());
  for (Index i = 0; i < J.rows(); ++i) {
    double d = J(i, i).real();
    if (!(d > 0.0)) throw DataError("block coherence needs positive auto-spectra");
    scale(i) = 1.0 / std::sqrt(d);
  }
  J = scale.asDiagonal() * J * scale.asDiagonal();
  auto joint = pair.joint();
  auto local = [&](const std::vector<Index>& side) {
    std::vector<Index> pos;
    for (Index i : side) pos.push_back(std::lower_bound(joint.begin(), joint.end(), i) - joint.begin());
    return pos;
  };
  double det_left = detail::submatrix(J, local(pair.left()), local(pair.left())).determinant().real();
  double det_right = detail::submatrix(J, local(pair.right()), local(pair.right())).determinant().real();
  if (det_left <= 1e-12) throw DataError("left block of the spectral matrix is singular");
  if (det_right <= 1e-12) throw DataError("right block of the spectral matrix is singular");
  double det_joint = J.determinant().real();
  return 1.0 - det_joint / (det_left * det_right);
}

inline CoherenceCurve cluster_coherence_curve(const SpectralField& field, const ClusterPair& pair, int p = 1) {
  if (field.kind != SpectralKind::coherence) throw std::invalid_argument("expected a coherence field");
  detail::check_p(p);
  CoherenceCurve curve{field.freqs, std::vector<double>(field.size()),
                       p == 1 ? PairMeasure::cco_p1 : PairMeasure::cco_p2};
  for (std::size_t j = 0; j < field.size(); ++j)
    curve.values[j] = cluster_coherence(field.mats[j].real(), pair, p);
  return curve;
}

/// Any of the five measures across all frequencies. Block coherence reads
/// `field` as a smoothed spectrum; the others read it as a coherence field.
inline CoherenceCurve measure_curve(const SpectralField& field, const ClusterPair& pair, PairMeasure measure) {
  if (measure == PairMeasure::block) {
    if (field.kind != SpectralKind::smoothed_spectrum)
      throw std::invalid_argument("block coherence needs a smoothed spectral field");
  } else if (field.kind != SpectralKind::coherence) {
    throw std::invalid_argument("expected a coherence field");
  }
  CoherenceCurve curve{field.freqs, std::vector<double>(field.size()), measure};
  for (std::size_t j = 0; j < field.size(); ++j) {
    switch (measure) {
      case PairMeasure::cco_p1: curve.values[j] = cluster_coherence(field.mats[j].real(), pair, 1); break;
      case PairMeasure::cco_p2: curve.values[j] = cluster_coherence(field.mats[j].real(), pair, 2); break;
      case PairMeasure::average: curve.values[j] = average_coherence(field.mats[j].real(), pair); break;
      case PairMeasure::minimum: curve.values[j] = minimum_coherence(field.mats[j].real(), pair); break;
      case PairMeasure::block: curve.values[j] = block_coherence(field.mats[j], pair); break;
    }
  }
  return curve;
}

inline nlohmann::json to_json(const CoherenceCurve& c) {
  return {{"measure", to_string(c.measure)}, {"freqs", c.freqs}, {"values", c.values}};
}

inline void write_csv(std::ostream& out, const CoherenceCurve& c) {
  out << "freq," << to_string(c.measure) << '\n';
  char buf[64];
  for (std::size_t j = 0; j < c.freqs.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.10g,%.17g\n", c.freqs[j], c.values[j]);
    out << buf;
  }
}

}  // namespace hcc
