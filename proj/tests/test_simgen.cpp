#include "hcc/pipeline.hpp"
#include "hcc/simgen.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace hcc;

TEST(Ar2, CoefficientsFromPeakAndModulus) {
  auto [phi1, phi2] = ar2_coefficients({2.0, 0.95, 1.0}, 100.0);
  EXPECT_NEAR(phi1, 2.0 * 0.95 * std::cos(2.0 * std::numbers::pi * 0.02), 1e-15);
  EXPECT_NEAR(phi1, 1.8850, 5e-5);
  EXPECT_DOUBLE_EQ(phi2, -0.9025);
}

TEST(Ar2, QuarterSamplingRateHasZeroFirstCoefficient) {
  for (double r : {0.3, 0.9, 0.99}) {
    auto [phi1, phi2] = ar2_coefficients({25.0, r, 1.0}, 100.0);
    EXPECT_NEAR(phi1, 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(phi2, -r * r);
  }
}

TEST(Ar2, ClosedFormSpectrumPeaksAtTheTarget) {
  auto [phi1, phi2] = ar2_coefficients({10.0, 0.99, 1.0}, 100.0);
  double best_hz = 0.0, best = 0.0;
  for (int i = 1; i < 50000; ++i) {
    double hz = i * 0.001;
    double s = ar2_spectrum(phi1, phi2, 1.0, hz, 100.0);
    if (s > best) {
      best = s;
      best_hz = hz;
    }
  }
  EXPECT_NEAR(best_hz, 10.0, 0.1);
  // Away from r -> 1 the maximum sits at cos(w) = phi1 (phi2 - 1) / (4 phi2), not at the root angle.
  for (double peak : {2.0, 6.0, 15.0, 40.0}) {
    auto [a, b] = ar2_coefficients({peak, 0.9, 1.0}, 100.0);
    double analytic = std::acos(a * (b - 1.0) / (4.0 * b)) / (2.0 * std::numbers::pi) * 100.0;
    double arg = 0.0, top = 0.0;
    for (int j = 1; j < 50000; ++j) {
      double s = ar2_spectrum(a, b, 1.0, j * 0.001, 100.0);
      if (s > top) {
        top = s;
        arg = j * 0.001;
      }
    }
    EXPECT_NEAR(arg, analytic, 1e-3) << peak;
  }
}

TEST(Ar2, RejectsPeaksOutsideTheOpenBandAndBadModulus) {
  EXPECT_THROW(ar2_coefficients({50.0, 0.9, 1.0}, 100.0), std::invalid_argument);
  EXPECT_THROW(ar2_coefficients({0.0, 0.9, 1.0}, 100.0), std::invalid_argument);
  EXPECT_THROW(ar2_coefficients({10.0, 1.0, 1.0}, 100.0), std::invalid_argument);
}

TEST(Ar2, EveryDesignIsCausal) {
  for (auto& name : experiment_names()) {
    auto e = experiment(name, 0);
    for (auto& l : e.mixture.latents) {
      auto [phi1, phi2] = ar2_coefficients(l, e.mixture.fs);
      EXPECT_LT(std::abs(phi2), 1.0);
      EXPECT_LT(phi2 + phi1, 1.0);
      EXPECT_LT(phi2 - phi1, 1.0);
    }
  }
}

TEST(Mixture, IdentityWithoutNoiseReproducesTheLatents) {
  MixtureSpec m;
  m.latents = {{3.0, 0.9, 1.0}, {12.0, 0.8, 2.0}};
  m.mixing = Eigen::MatrixXd::Identity(2, 2);
  m.noise_sd = {0.0};
  m.seed = 42;
  auto ts = simulate_mixture(m);
  for (Index l = 0; l < 2; ++l) {
    auto rng = make_stream(42, static_cast<std::uint64_t>(l));
    Eigen::VectorXd z = simulate_ar2(m.latents[static_cast<std::size_t>(l)], 100.0, 1000, rng);
    EXPECT_EQ(ts.data().row(l), z.transpose());
  }
}

TEST(Mixture, DimensionMismatchIsRejected) {
  MixtureSpec m;
  m.latents = {{3.0, 0.9, 1.0}};
  m.mixing = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(simulate_mixture(m), std::invalid_argument);
  m.mixing = Eigen::MatrixXd::Ones(3, 1);
  m.noise_sd = {1.0, 2.0};
  EXPECT_THROW(simulate_mixture(m), std::invalid_argument);
}

TEST(Mixture, SameSeedIsBitIdentical) {
  for (auto& name : experiment_names()) {
    auto a = experiment(name, 9), b = experiment(name, 9), c = experiment(name, 10);
    EXPECT_EQ(a.data.data(), b.data.data()) << name;
    EXPECT_NE(a.data.data(), c.data.data()) << name;
  }
}

TEST(Mixture, DistinctStreamsAreUncorrelated) {
  const Index T = 100000;
  MixtureSpec m;
  m.latents = {{10.0, 0.5, 1.0}, {10.0, 0.5, 1.0}, {10.0, 0.5, 1.0}};
  m.mixing = Eigen::MatrixXd::Identity(3, 3);
  m.noise_sd = {0.0};
  m.samples = T;
  m.seed = 5;
  auto X = simulate_mixture(m).data();
  for (Index a = 0; a < 3; ++a)
    for (Index b = a + 1; b < 3; ++b) {
      Eigen::ArrayXd x = X.row(a).array() - X.row(a).mean();
      Eigen::ArrayXd y = X.row(b).array() - X.row(b).mean();
      double rho = (x * y).sum() / std::sqrt(x.square().sum() * y.square().sum());
      EXPECT_LT(std::abs(rho), 0.05) << a << "," << b;
    }
}

TEST(Designs, ShapesBandsAndReferences) {
  auto e1 = experiment("exp1", 0);
  EXPECT_EQ(e1.data.channels(), 6);
  EXPECT_EQ(e1.data.samples(), 1000);
  EXPECT_DOUBLE_EQ(e1.data.fs(), 100.0);
  EXPECT_TRUE(e1.reference.same_grouping(Partition({0, 0, 0, 1, 1, 1})));

  auto c1 = experiment("exp2-case1", 0);
  Eigen::MatrixXd A(6, 2);
  A << 1, 0, 1, 0, .2, 0, 0, 1, 0, 1, 0, .2;
  EXPECT_EQ(c1.mixture.mixing, A);
  EXPECT_TRUE(c1.reference.same_grouping(Partition({0, 0, 0, 1, 1, 1})));

  auto e3 = experiment("exp3", 0);
  EXPECT_EQ(e3.data.channels(), 128);
  EXPECT_EQ(e3.mixture.latents.size(), 5u);
  for (int i = 0; i < 25; ++i) {
    EXPECT_EQ(e3.reference[static_cast<std::size_t>(i)], e3.reference[0]);
    EXPECT_EQ(e3.reference[static_cast<std::size_t>(25 + i)], e3.reference[25]);
    EXPECT_EQ(e3.reference[static_cast<std::size_t>(50 + i)], e3.reference[50]);
  }
  EXPECT_NE(e3.reference[0], e3.reference[25]);
  EXPECT_NE(e3.reference[25], e3.reference[50]);
  EXPECT_EQ(e3.mixture.mixing.row(0), (Eigen::RowVectorXd(5) << 1, .2, 0, 0, 0).finished());
  EXPECT_EQ(e3.mixture.mixing.row(60), (Eigen::RowVectorXd(5) << 0, .2, 1, 0, 0).finished());
  EXPECT_EQ(e3.mixture.mixing.row(127), (Eigen::RowVectorXd(5) << 0, 0, 0, 0, 1).finished());

  auto e4 = experiment("exp4", 0);
  EXPECT_EQ(e4.data.channels(), 19);
  EXPECT_TRUE(e4.data.layout().has_value());
  EXPECT_EQ(e4.band, *band_by_name("alpha"));

  EXPECT_THROW(experiment("exp9", 0), std::invalid_argument);
}

TEST(Spatial, DistanceKernel) {
  ChannelLayout l({{"a", {0.0, 0.0}}, {"b", {1.0 / 3.0, 0.0}}, {"c", {0.0, 0.5}}});
  auto A = spatial_mixing(l, {"a"});
  EXPECT_DOUBLE_EQ(A(0, 0), 1.0);
  EXPECT_NEAR(A(1, 0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(A(1, 0), 0.3679, 5e-5);
  EXPECT_THROW(spatial_mixing(l, {"zz"}), std::invalid_argument);
  EXPECT_THROW(spatial_mixing(l, {"a"}, 0.0), std::invalid_argument);
}

TEST(Spatial, ChannelsNearASourceLoadMostOnIt) {
  auto layout = standard_1020_layout();
  std::vector<std::string> sources{"C3", "C4", "Pz", "Fz"};
  auto A = spatial_mixing(layout, sources);
  Index r = 0;
  for (auto& [name, pos] : layout.entries()) {
    Index nearest = 0;
    double best = 1e9;
    for (std::size_t s = 0; s < sources.size(); ++s) {
      double d = distance(pos, layout.at(sources[s]));
      if (d < best - 1e-12) {
        best = d;
        nearest = static_cast<Index>(s);
      }
    }
    Index loaded = 0;
    A.row(r).maxCoeff(&loaded);
    EXPECT_EQ(loaded, nearest) << name;
    ++r;
  }
  EXPECT_DOUBLE_EQ(A(8, 0), 1.0);  // C3 on its own source
}

TEST(Blink, ZeroAmplitudeLeavesOnlyNoise) {
  ArtifactSpec s;
  s.onsets = {1.0, 3.0};
  s.amplitude = 0.0;
  EXPECT_EQ(eyeblink_series(s, 500, 100.0, 1), Eigen::VectorXd::Zero(500));
  s.noise_sd = 0.5;
  auto noisy = eyeblink_series(s, 500, 100.0, 1);
  ArtifactSpec only_noise;
  only_noise.noise_sd = 0.5;
  EXPECT_EQ(noisy, eyeblink_series(only_noise, 500, 100.0, 1));
}

TEST(Blink, SingleBlinkIntegratesToAmplitudeTimesOneMinusWeight) {
  ArtifactSpec s;
  s.onsets = {0.5};
  s.amplitude = 3.0;
  const double fs = 2000.0;
  auto x = eyeblink_series(s, 4000, fs, 0);
  EXPECT_NEAR(x.sum() / fs, 3.0 * (1.0 - 0.6), 1e-3);
}

TEST(Blink, OnsetOutsideRecordingIsRejected) {
  ArtifactSpec s;
  s.onsets = {20.0};
  EXPECT_THROW(eyeblink_series(s, 1000, 100.0, 0), std::invalid_argument);
}

TEST(Blink, ContaminationRaisesLowFrequencyPower) {
  ExperimentOptions clean;
  clean.contaminate = false;
  auto a = experiment("artifact", 3, clean), b = experiment("artifact", 3);
  auto sa = estimate_spectra(a.data).smoothed, sb = estimate_spectra(b.data).smoothed;
  Index fp1 = *a.data.channel_index("Fp1"), o1 = *a.data.channel_index("O1");
  double clean_low = 0.0, dirty_low = 0.0;
  for (auto j : sa.band_bins({0.0, 4.0, ""})) {
    clean_low += sa.mats[j](fp1, fp1).real();
    dirty_low += sb.mats[j](fp1, fp1).real();
  }
  EXPECT_GT(dirty_low, 2.0 * clean_low);
  EXPECT_EQ(a.data.data().row(o1), b.data.data().row(o1));
}

TEST(Config, JsonRoundTrip) {
  auto e = experiment("exp2-case2", 1);
  auto back = mixture_from_json(nlohmann::json::parse(to_json(e.mixture).dump()));
  EXPECT_EQ(simulate_mixture(back).data(), e.data.data());
  ExperimentOptions o;
  o.noise_sd = 0.3;
  o.contaminate = false;
  auto oj = experiment_options_from_json(to_json(o));
  EXPECT_EQ(oj.noise_sd, 0.3);
  EXPECT_FALSE(oj.contaminate);
}
