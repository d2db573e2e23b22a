#include "hcc/core.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

using namespace hcc;

TEST(Bands, StandardBandsMatchTheFiveNamedRanges) {
  auto bands = standard_bands();
  ASSERT_EQ(bands.size(), 5u);
  auto find = [&](const std::string& n) {
    for (auto& b : bands)
      if (b.name == n) return b;
    return FrequencyBand{};
  };
  EXPECT_EQ(find("alpha"), (FrequencyBand{8, 12, "alpha"}));
  EXPECT_EQ(find("beta"), (FrequencyBand{12, 30, "beta"}));
  EXPECT_EQ(find("delta"), (FrequencyBand{0, 4, "delta"}));
  EXPECT_EQ(find("theta"), (FrequencyBand{4, 8, "theta"}));
  EXPECT_EQ(find("gamma"), (FrequencyBand{30, 50, "gamma"}));
}

TEST(Bands, EveryStandardBandLiesWithinZeroToFifty) {
  for (auto& b : standard_bands()) {
    EXPECT_GE(b.lo, 0.0);
    EXPECT_LT(b.lo, b.hi);
    EXPECT_LE(b.hi, 50.0);
  }
}

TEST(Bands, HalfOpenSoAdjacentBandsShareNoFrequency) {
  auto bands = standard_bands();
  for (double hz = 0.0; hz < 50.0; hz += 0.1) {
    int hits = 0;
    for (auto& b : bands) hits += b.contains(hz);
    EXPECT_EQ(hits, 1) << hz;
  }
  EXPECT_FALSE(bands[2].contains(12.0));
  EXPECT_TRUE(bands[2].contains(8.0));
}

TEST(Bands, ParseAcceptsNamesAndRanges) {
  EXPECT_EQ(parse_band("alpha").lo, 8.0);
  auto b = parse_band("2.5,7");
  EXPECT_DOUBLE_EQ(b.lo, 2.5);
  EXPECT_DOUBLE_EQ(b.hi, 7.0);
  EXPECT_DOUBLE_EQ(parse_band("1:3").hi, 3.0);
  EXPECT_THROW(parse_band("kappa"), std::invalid_argument);
  EXPECT_THROW(parse_band("5,2"), std::invalid_argument);
  EXPECT_THROW(parse_band("1,x"), std::invalid_argument);
}

TEST(Layout, Standard1020) {
  auto l = standard_1020_layout();
  EXPECT_EQ(l.size(), 19u);
  EXPECT_LT(l.at("T3").x, 0.0);
  EXPECT_GT(l.at("T4").x, 0.0);
  EXPECT_DOUBLE_EQ(l.at("Cz").x, 0.0);
  EXPECT_DOUBLE_EQ(l.at("Cz").y, 0.0);
  EXPECT_GT(l.at("Fz").y, 0.0);
  EXPECT_LT(l.at("O1").y, 0.0);
  for (const char* n : {"Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz", "C4", "T4", "T5", "P3", "Pz",
                        "P4", "T6", "O1", "O2"})
    EXPECT_TRUE(l.contains(n)) << n;
  for (auto& [name, p] : l.entries()) EXPECT_LE(std::hypot(p.x, p.y), 1.0) << name;
}

TEST(Layout, LookupIgnoresCase) {
  auto l = standard_1020_layout();
  EXPECT_TRUE(l.contains("FP1"));
  EXPECT_TRUE(l.contains("cz"));
  EXPECT_FALSE(l.contains("Fpz"));
}

TEST(Layout, RejectsPositionsOutsideTheUnitDisk) {
  EXPECT_THROW(ChannelLayout({{"a", {0.9, 0.9}}}), DataError);
}

TEST(Layout, CsvRoundTrip) {
  auto l = standard_1020_layout();
  std::stringstream ss;
  write_layout_csv(ss, l);
  auto back = read_layout_csv(ss);
  ASSERT_EQ(back.size(), l.size());
  for (auto& [name, p] : l.entries()) {
    EXPECT_NEAR(back.at(name).x, p.x, 1e-5);
    EXPECT_NEAR(back.at(name).y, p.y, 1e-5);
  }
}

TEST(Layout, CsvErrorsCarryLineNumbers) {
  std::istringstream in("name,x,y\nC3,0.1,0.2\nC4,0.3\n");
  try {
    read_layout_csv(in);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(TimeSeriesSet, Invariants) {
  Eigen::MatrixXd two = Eigen::MatrixXd::Zero(2, 5);
  EXPECT_NO_THROW(TimeSeriesSet(two, 100.0));
  EXPECT_THROW(TimeSeriesSet(Eigen::MatrixXd::Zero(0, 5), 100.0), DataError);
  EXPECT_THROW(TimeSeriesSet(Eigen::MatrixXd::Zero(2, 1), 100.0), DataError);
  EXPECT_THROW(TimeSeriesSet(two, 0.0), DataError);
  EXPECT_THROW(TimeSeriesSet(two, 100.0, {"a", "a"}), DataError);
  EXPECT_THROW(TimeSeriesSet(two, 100.0, {"a"}), DataError);
  Eigen::MatrixXd bad = two;
  bad(1, 3) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(TimeSeriesSet(bad, 100.0), DataError);
  EXPECT_THROW(TimeSeriesSet(two, 100.0, {"C3", "Qq"}, standard_1020_layout()), DataError);
}

TEST(TimeSeriesSet, DefaultLabelsAndSegments) {
  TimeSeriesSet ts(Eigen::MatrixXd::Random(3, 1050), 100.0);
  EXPECT_EQ(ts.labels(), (std::vector<std::string>{"X1", "X2", "X3"}));
  auto segs = ts.segments(2.0);
  ASSERT_EQ(segs.size(), 5u);
  EXPECT_EQ(segs[1].samples(), 200);
  EXPECT_EQ(segs[1].data()(2, 0), ts.data()(2, 200));
  EXPECT_THROW(ts.segments(20.0), DataError);
  EXPECT_THROW(ts.slice(1000, 100), DataError);
}

TEST(Csv, ReadsHeaderAndOptionalTimeColumn) {
  std::istringstream plain("a,b\n1,2\n3,4\n5,6\n");
  auto ts = read_csv(plain, 250.0);
  EXPECT_EQ(ts.channels(), 2);
  EXPECT_EQ(ts.samples(), 3);
  EXPECT_DOUBLE_EQ(ts.fs(), 250.0);
  EXPECT_EQ(ts.data()(1, 2), 6.0);

  std::istringstream timed("t,a\n0,1\n0.5,2\n1.0,3\n");
  auto tt = read_csv(timed);
  EXPECT_EQ(tt.channels(), 1);
  EXPECT_NEAR(tt.fs(), 2.0, 1e-12);
}

TEST(Csv, RoundTripIsExact) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Eigen::MatrixXd X(4, 64);
  for (Index i = 0; i < X.size(); ++i) X.data()[i] = g(rng);
  TimeSeriesSet ts(X, 100.0, {"Fp1", "C3", "x y", "O2"});
  std::stringstream ss;
  write_csv(ss, ts);
  auto back = read_csv(ss);
  EXPECT_EQ(back.labels(), ts.labels());
  EXPECT_EQ(back.data(), ts.data());
  EXPECT_NEAR(back.fs(), 100.0, 1e-9);
}

TEST(Csv, RaggedRowReportsItsLineNumber) {
  std::istringstream in("a,b\n1,2\n3\n5,6\n");
  try {
    read_csv(in);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Csv, NonNumericCellReportsItsLineNumber) {
  std::istringstream in("a,b\n1,2\n3,4\n5,oops\n");
  try {
    read_csv(in);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(Csv, EmptyAndTooShortInputs) {
  std::istringstream empty("");
  EXPECT_THROW(read_csv(empty), DataError);
  std::istringstream one("a\n1\n");
  EXPECT_THROW(read_csv(one), DataError);
  EXPECT_THROW(read_csv_file("/nonexistent/file.csv"), DataError);
}

TEST(Partition, InvariantsAndAccessors) {
  Partition p({0, 0, 1, 2, 1});
  EXPECT_EQ(p.k(), 3);
  EXPECT_TRUE(p.together(2, 4));
  EXPECT_FALSE(p.together(0, 2));
  EXPECT_EQ(p.members(1), (std::vector<Index>{2, 4}));
  EXPECT_THROW(Partition({0, 2}), std::invalid_argument);
  EXPECT_THROW(Partition({-1, 0}), std::invalid_argument);
  EXPECT_THROW(Partition(std::vector<int>{}), std::invalid_argument);
  EXPECT_EQ(Partition::singletons(4).k(), 4);
}

TEST(Partition, RelabelingPreservesCoMembership) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + static_cast<int>(rng() % 12);
    int k = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i < k ? i : static_cast<int>(rng() % static_cast<unsigned>(k));
    std::shuffle(labels.begin(), labels.end(), rng);
    Partition p(labels);
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> relabeled;
    for (int l : labels) relabeled.push_back(perm[static_cast<std::size_t>(l)]);
    Partition q(relabeled);
    EXPECT_TRUE(p.same_grouping(q));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        EXPECT_EQ(p.together(static_cast<std::size_t>(i), static_cast<std::size_t>(j)),
                  q.together(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
  }
}

TEST(Partition, CanonicalOrdersIdsByFirstChannel) {
  auto p = Partition::canonical({7, 3, 7, 9});
  EXPECT_EQ(p.assignment(), (std::vector<int>{0, 1, 0, 2}));
  EXPECT_FALSE(Partition({0, 0, 1}).same_grouping(Partition({0, 1, 1})));
}
