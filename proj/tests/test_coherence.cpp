#include "hcc/coherence.hpp"
#include "hcc/pipeline.hpp"
#include "hcc/simgen.hpp"
#include "oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace hcc;

namespace {

std::vector<Index> as_index(const std::vector<int>& v) { return {v.begin(), v.end()}; }

Eigen::MatrixXd pair_matrix(double kappa) {
  Eigen::MatrixXd C(2, 2);
  C << 1.0, kappa, kappa, 1.0;
  return C;
}

// Random Hermitian PD spectral matrix with random auto-spectrum scales.
Eigen::MatrixXcd random_spectrum(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd V(n, n + 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n + 2; ++j) V(i, j) = {g(rng), g(rng)};
  return V * V.adjoint();
}

Eigen::MatrixXd coherence_of(const Eigen::MatrixXcd& S) {
  Eigen::MatrixXd C(S.rows(), S.cols());
  for (Index i = 0; i < S.rows(); ++i)
    for (Index j = 0; j < S.cols(); ++j) C(i, j) = std::norm(S(i, j)) / (S(i, i).real() * S(j, j).real());
  return C;
}

}  // namespace

TEST(Eigenvalues, IdentityNormalisedByTotal) {
  auto ev = normalized_sorted_eigenvalues(Eigen::MatrixXd::Identity(2, 2), 2.0);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_NEAR(ev[0], 0.5, 1e-15);
  EXPECT_NEAR(ev[1], 0.5, 1e-15);
}

TEST(Eigenvalues, TwoByTwoCoherence) {
  auto ev = normalized_sorted_eigenvalues(pair_matrix(0.81), 2.0);
  EXPECT_NEAR(ev[0], 0.905, 1e-12);
  EXPECT_NEAR(ev[1], 0.095, 1e-12);
}

TEST(Eigenvalues, AllOnesIsRankOne) {
  auto ev = normalized_sorted_eigenvalues(Eigen::MatrixXd::Ones(4, 4), 4.0);
  EXPECT_NEAR(ev[0], 1.0, 1e-12);
  for (int i = 1; i < 4; ++i) EXPECT_NEAR(ev[static_cast<std::size_t>(i)], 0.0, 1e-12);
  for (int i = 1; i < 4; ++i) EXPECT_GE(ev[static_cast<std::size_t>(i)], 0.0);
}

TEST(Eigenvalues, AsymmetricInputIsRejected) {
  Eigen::MatrixXd M = pair_matrix(0.3);
  M(0, 1) = 0.4;
  EXPECT_THROW(normalized_sorted_eigenvalues(M, 2.0), std::invalid_argument);
}

TEST(ClusterCoherence, SingletonPairRecoversPairwiseCoherence) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ClusterPair pair({0}, {1});
  for (int i = 0; i < 1000; ++i) {
    double kappa = u(rng);
    EXPECT_NEAR(cluster_coherence(pair_matrix(kappa), pair, 1), kappa, 1e-12);
    EXPECT_NEAR(cluster_coherence(pair_matrix(kappa), pair, 2), kappa / std::sqrt(2.0), 1e-12);
  }
}

TEST(ClusterCoherence, BlockDiagonalGivesZero) {
  std::mt19937_64 rng(5);
  for (auto [n1, n2] : {std::pair{1, 1}, {2, 2}, {5, 5}, {1, 4}, {3, 2}}) {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n1 + n2, n1 + n2);
    C.topLeftCorner(n1, n1) = oracle::random_coherence(n1, 3, rng);
    C.bottomRightCorner(n2, n2) = oracle::random_coherence(n2, 3, rng);
    std::vector<Index> left, right;
    for (int i = 0; i < n1; ++i) left.push_back(i);
    for (int i = 0; i < n2; ++i) right.push_back(n1 + i);
    for (int p : {1, 2}) EXPECT_NEAR(cluster_coherence(C, {left, right}, p), 0.0, 1e-12) << n1 << "," << n2;
  }
}

TEST(ClusterCoherence, PerfectCorrelationEqualSizesGivesOne) {
  for (int n : {1, 2, 5}) {
    Eigen::MatrixXd C = Eigen::MatrixXd::Ones(2 * n, 2 * n);
    std::vector<Index> left, right;
    for (int i = 0; i < n; ++i) {
      left.push_back(i);
      right.push_back(n + i);
    }
    EXPECT_NEAR(cluster_coherence(C, {left, right}, 1), 1.0, 1e-12) << n;
  }
}

TEST(ClusterCoherence, PerfectCorrelationUnequalSizesFallsShortOfOne) {
  // All-ones with n1 != n2 evaluates to 2 min(n1, n2) / (n1 + n2).
  for (auto [n1, n2] : {std::pair{1, 2}, {1, 4}, {2, 5}}) {
    Eigen::MatrixXd C = Eigen::MatrixXd::Ones(n1 + n2, n1 + n2);
    std::vector<Index> left, right;
    for (int i = 0; i < n1; ++i) left.push_back(i);
    for (int i = 0; i < n2; ++i) right.push_back(n1 + i);
    EXPECT_NEAR(cluster_coherence(C, {left, right}, 1), 2.0 * std::min(n1, n2) / (n1 + n2), 1e-12);
  }
}

TEST(ClusterCoherence, EmpiricallyBoundedByOne) {
  std::mt19937_64 rng(99);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    int n = 2 + static_cast<int>(rng() % 7);
    int rank = 1 + static_cast<int>(rng() % static_cast<unsigned>(n + 1));
    auto C = oracle::random_coherence(n, rank, rng);
    auto [l, r] = oracle::random_split(n, rng);
    for (int p : {1, 2}) {
      double v = cluster_coherence(C, {as_index(l), as_index(r)}, p);
      EXPECT_GE(v, 0.0);
      worst = std::max(worst, v);
    }
  }
  EXPECT_LE(worst, 1.0 + 1e-9);
}

TEST(ClusterCoherence, SwappingSidesIsExact) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    int n = 2 + static_cast<int>(rng() % 7);
    auto C = oracle::random_coherence(n, n, rng);
    auto [l, r] = oracle::random_split(n, rng);
    ClusterPair pair(as_index(l), as_index(r));
    for (int p : {1, 2}) EXPECT_EQ(cluster_coherence(C, pair, p), cluster_coherence(C, pair.swapped(), p));
  }
}

TEST(ClusterCoherence, MatchesBruteForceOracle) {
  std::mt19937_64 rng(31337);
  for (int i = 0; i < 1000; ++i) {
    int n = 2 + static_cast<int>(rng() % 5);
    auto C = oracle::random_coherence(n, n + 2, rng);
    auto [l, r] = oracle::random_split(n, rng);
    int p = 1 + static_cast<int>(rng() % 2);
    double fast = cluster_coherence(C, {as_index(l), as_index(r)}, p);
    double slow = oracle::cluster_coherence(C, l, r, p);
    EXPECT_NEAR(fast, slow, 1e-8) << "instance " << i;
  }
}

TEST(ClusterCoherence, InvalidArguments) {
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_THROW(cluster_coherence(C, {{0}, {1}}, 3), std::invalid_argument);
  EXPECT_THROW(ClusterPair({0, 1}, {1, 2}), std::invalid_argument);
  EXPECT_THROW(ClusterPair({}, {1}), std::invalid_argument);
  EXPECT_THROW(cluster_coherence(C, {{0}, {5}}, 1), std::invalid_argument);
}

TEST(Measures, PermutationInvarianceOfAllFive) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 3 + static_cast<int>(rng() % 4);
    Eigen::MatrixXcd S = random_spectrum(n, rng);
    Eigen::MatrixXd C = coherence_of(S);
    auto [l, r] = oracle::random_split(n, rng);
    // Relabel channels with a random permutation and map the pair through it.
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXcd Sp(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) Sp(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) = S(i, j);
    Eigen::MatrixXd Cp = coherence_of(Sp);
    std::vector<Index> lp, rp;
    for (int i : l) lp.push_back(perm[static_cast<std::size_t>(i)]);
    for (int i : r) rp.push_back(perm[static_cast<std::size_t>(i)]);
    std::shuffle(lp.begin(), lp.end(), rng);
    ClusterPair a(as_index(l), as_index(r)), b(lp, rp);
    EXPECT_NEAR(cluster_coherence(C, a, 1), cluster_coherence(Cp, b, 1), 1e-10);
    EXPECT_NEAR(cluster_coherence(C, a, 2), cluster_coherence(Cp, b, 2), 1e-10);
    EXPECT_NEAR(average_coherence(C, a), average_coherence(Cp, b), 1e-10);
    EXPECT_NEAR(minimum_coherence(C, a), minimum_coherence(Cp, b), 1e-10);
    EXPECT_NEAR(block_coherence(S, a), block_coherence(Sp, b), 1e-10);
  }
}

TEST(Measures, AverageAndMinimumUseTheCrossBlockOnly) {
  EXPECT_DOUBLE_EQ(average_coherence(Eigen::MatrixXd::Ones(4, 4), {{0, 1}, {2, 3}}), 1.0);
  EXPECT_DOUBLE_EQ(minimum_coherence(Eigen::MatrixXd::Ones(4, 4), {{0, 1}, {2, 3}}), 1.0);
  Eigen::MatrixXd C(3, 3);
  C << 1.0, 0.0, 0.2, 0.0, 1.0, 0.8, 0.2, 0.8, 1.0;
  ClusterPair pair({0, 1}, {2});
  EXPECT_DOUBLE_EQ(average_coherence(C, pair), 0.5);
  EXPECT_DOUBLE_EQ(minimum_coherence(C, pair), 0.2);
}

TEST(Measures, BlockCoherence) {
  std::mt19937_64 rng(4);
  Eigen::MatrixXcd S = random_spectrum(4, rng);
  Eigen::MatrixXcd split = S;
  split.block(0, 2, 2, 2).setZero();
  split.block(2, 0, 2, 2).setZero();
  EXPECT_NEAR(block_coherence(split, {{0, 1}, {2, 3}}), 0.0, 1e-12);

  Eigen::MatrixXd C = coherence_of(S);
  EXPECT_NEAR(block_coherence(S, {{0}, {3}}), C(0, 3), 1e-12);

  Eigen::MatrixXcd singular = Eigen::MatrixXcd::Ones(3, 3);
  try {
    block_coherence(singular, {{0, 1}, {2}});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("left block"), std::string::npos);
  }
}

TEST(Curves, SingletonCurveIsThePairwiseCoherence) {
  auto e = experiment("exp1", 3);
  auto est = estimate_spectra(e.data);
  auto curve = cluster_coherence_curve(est.coherence, {{1}, {4}}, 1);
  for (std::size_t j = 0; j < curve.values.size(); ++j)
    EXPECT_NEAR(curve.values[j], est.coherence.mats[j](1, 4).real(), 1e-12);
}

TEST(Curves, BlockDiagonalFieldGivesZeroCurve) {
  SpectralField f;
  f.kind = SpectralKind::coherence;
  std::mt19937_64 rng(8);
  for (int j = 1; j <= 30; ++j) {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(5, 5);
    C.topLeftCorner(2, 2) = oracle::random_coherence(2, 2, rng);
    C.bottomRightCorner(3, 3) = oracle::random_coherence(3, 2, rng);
    f.freqs.push_back(j);
    f.mats.push_back(C.cast<std::complex<double>>());
  }
  for (int p : {1, 2})
    for (double v : cluster_coherence_curve(f, {{0, 1}, {2, 3, 4}}, p).values) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Curves, IllustrationOneOrdering) {
  auto e = experiment("illustration1", 0);
  auto est = estimate_spectra(e.data);
  ClusterPair pair({0, 1}, {2});
  auto cco = measure_curve(est.coherence, pair, PairMeasure::cco_p1);
  auto ac = measure_curve(est.coherence, pair, PairMeasure::average);
  auto block = measure_curve(est.smoothed, pair, PairMeasure::block);
  EXPECT_LT(cco.band_mean(e.band), 0.4);
  EXPECT_GT(ac.band_mean(e.band), 0.5);
  EXPECT_GT(block.band_mean(e.band), cco.band_mean(e.band));
  EXPECT_THROW(measure_curve(est.coherence, pair, PairMeasure::block), std::invalid_argument);
}
