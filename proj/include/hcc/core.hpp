#pragma once

// Shared domain types: multichannel series, frequency bands, scalp layouts
// and partitions.

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hcc {

using Index = Eigen::Index;

inline constexpr const char* kVersion = "0.1.0";

/// Raised for malformed or numerically unusable input data (as opposed to a
/// programming error, which throws std::invalid_argument).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, std::size_t line = 0) : std::runtime_error(what), line_(line) {}

  /// 1-based input line the error refers to, or 0.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct FrequencyBand {
  double lo = 0.0;
  double hi = 0.0;
  std::string name;

  // Half-open so that adjacent bands never share a Fourier frequency.
  bool contains(double hz) const { return hz >= lo && hz < hi; }

  std::string describe() const {
    std::ostringstream os;
    if (!name.empty()) os << name << ' ';
    os << '[' << lo << ", " << hi << ") Hz";
    return os.str();
  }

  friend bool operator==(const FrequencyBand& a, const FrequencyBand& b) {
    return a.lo == b.lo && a.hi == b.hi && a.name == b.name;
  }
};

inline FrequencyBand make_band(double lo, double hi, std::string name = {}) {
  if (!(lo >= 0.0) || !(hi > lo) || !std::isfinite(hi))
    throw std::invalid_argument("frequency band requires 0 <= lo < hi, got [" +
                                std::to_string(lo) + ", " + std::to_string(hi) + ")");
  return FrequencyBand{lo, hi, std::move(name)};
}

/// delta, theta, alpha, beta and gamma in Hz.
inline std::vector<FrequencyBand> standard_bands() {
  return {{0.0, 4.0, "delta"},
          {4.0, 8.0, "theta"},
          {8.0, 12.0, "alpha"},
          {12.0, 30.0, "beta"},
          {30.0, 50.0, "gamma"}};
}

inline std::optional<FrequencyBand> band_by_name(std::string_view name) {
  for (auto& b : standard_bands())
    if (b.name == name) return b;
  if (name == "full" || name == "all") return FrequencyBand{0.0, 50.0, "full"};
  return std::nullopt;
}

/// Accepts a standard band name ("alpha") or "lo,hi" / "lo:hi" in Hz.
inline FrequencyBand parse_band(std::string_view text) {
  if (auto b = band_by_name(text)) return *b;
  std::string s(text);
  auto sep = s.find_first_of(",:-");
  if (sep == std::string::npos || sep == 0)
    throw std::invalid_argument("unknown band '" + s + "'");
  try {
    std::size_t used = 0;
    double lo = std::stod(s.substr(0, sep), &used);
    if (used != sep) throw std::invalid_argument("");
    std::string rest = s.substr(sep + 1);
    double hi = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("");
    return make_band(lo, hi);
  } catch (const std::logic_error&) {
    throw std::invalid_argument("cannot parse band '" + s + "'");
  }
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Channel name -> position in a unit-disk projection of the scalp
/// (x to the right ear, y toward the nose). Insertion order is preserved.
class ChannelLayout {
 public:
  ChannelLayout() = default;

  explicit ChannelLayout(std::vector<std::pair<std::string, Point2>> entries)
      : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& [name, p] = entries_[i];
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || std::hypot(p.x, p.y) > 1.0 + 1e-9)
        throw DataError("layout position of '" + name + "' is outside the unit disk");
      for (std::size_t j = 0; j < i; ++j)
        if (entries_[j].first == name) throw DataError("duplicate layout channel '" + name + "'");
    }
  }

  std::size_t size() const { return entries_.size(); }
  const auto& entries() const { return entries_; }

  std::optional<Point2> find(std::string_view name) const {
    for (auto& [n, p] : entries_)
      if (equal_names(n, name)) return p;
    return std::nullopt;
  }

  Point2 at(std::string_view name) const {
    if (auto p = find(name)) return *p;
    throw std::invalid_argument("channel '" + std::string(name) + "' not in layout");
  }

  bool contains(std::string_view name) const { return find(name).has_value(); }

  // 10-20 names are written both as "Fp1" and "FP1".
  static bool equal_names(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
             return std::tolower(static_cast<unsigned char>(x)) ==
                    std::tolower(static_cast<unsigned char>(y));
           });
  }

 private:
  std::vector<std::pair<std::string, Point2>> entries_;
};

/// The 19 channels of the 10-20 system in an equal-angle azimuthal
/// projection: Cz at the origin, radius = polar angle / 90 degrees, so the
/// Fpz-T3-Oz-T4 circumference sits at r = 0.8. F3/F4/P3/P4 are the
/// great-circle midpoints of Fz-F7, Fz-F8, Pz-T5 and Pz-T6.
inline ChannelLayout standard_1020_layout() {
  return ChannelLayout({
      {"Fp1", {-0.247214, 0.760845}},
      {"Fp2", {0.247214, 0.760845}},
      {"F7", {-0.647214, 0.470228}},
      {"F3", {-0.315760, 0.470632}},
      {"Fz", {0.000000, 0.400000}},
      {"F4", {0.315760, 0.470632}},
      {"F8", {0.647214, 0.470228}},
      {"T3", {-0.800000, 0.000000}},
      {"C3", {-0.400000, 0.000000}},
      {"Cz", {0.000000, 0.000000}},
      {"C4", {0.400000, 0.000000}},
      {"T4", {0.800000, 0.000000}},
      {"T5", {-0.647214, -0.470228}},
      {"P3", {-0.315760, -0.470632}},
      {"Pz", {0.000000, -0.400000}},
      {"P4", {0.315760, -0.470632}},
      {"T6", {0.647214, -0.470228}},
      {"O1", {-0.247214, -0.760845}},
      {"O2", {0.247214, -0.760845}},
  });
}

/// N channels x T samples of a real multichannel recording.
class TimeSeriesSet {
 public:
  TimeSeriesSet(Eigen::MatrixXd data, double fs, std::vector<std::string> labels = {},
                std::optional<ChannelLayout> layout = std::nullopt)
      : data_(std::move(data)), fs_(fs), labels_(std::move(labels)), layout_(std::move(layout)) {
    if (data_.rows() < 1) throw DataError("time series set needs at least one channel");
    if (data_.cols() < 2) throw DataError("time series set needs at least two samples");
    if (!(fs_ > 0.0) || !std::isfinite(fs_)) throw DataError("sampling rate must be positive");
    for (Index c = 0; c < data_.rows(); ++c)
      for (Index t = 0; t < data_.cols(); ++t)
        if (!std::isfinite(data_(c, t)))
          throw DataError("non-finite sample in channel " + std::to_string(c) + " at t=" +
                          std::to_string(t));
    if (labels_.empty()) {
      for (Index c = 0; c < data_.rows(); ++c) labels_.push_back("X" + std::to_string(c + 1));
    }
    if (static_cast<Index>(labels_.size()) != data_.rows())
      throw DataError("label count does not match channel count");
    for (std::size_t i = 0; i < labels_.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (labels_[i] == labels_[j]) throw DataError("duplicate channel label '" + labels_[i] + "'");
    if (layout_) {
      for (auto& l : labels_)
        if (!layout_->contains(l)) throw DataError("layout has no position for channel '" + l + "'");
    }
  }

  const Eigen::MatrixXd& data() const { return data_; }
  Index channels() const { return data_.rows(); }
  Index samples() const { return data_.cols(); }
  double fs() const { return fs_; }
  double duration() const { return static_cast<double>(samples()) / fs_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::optional<ChannelLayout>& layout() const { return layout_; }

  std::optional<Index> channel_index(std::string_view label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (ChannelLayout::equal_names(labels_[i], label)) return static_cast<Index>(i);
    return std::nullopt;
  }

  TimeSeriesSet with_layout(ChannelLayout layout) const {
    return TimeSeriesSet(data_, fs_, labels_, std::move(layout));
  }

  /// Samples [begin, begin + length).
  TimeSeriesSet slice(Index begin, Index length) const {
    if (begin < 0 || length < 2 || begin + length > samples())
      throw DataError("segment [" + std::to_string(begin) + ", " + std::to_string(begin + length) +
                      ") is outside the recording");
    return TimeSeriesSet(data_.middleCols(begin, length), fs_, labels_, layout_);
  }

  /// Disjoint segments of `seconds` each; a trailing partial segment is dropped.
  std::vector<TimeSeriesSet> segments(double seconds) const {
    auto len = static_cast<Index>(std::llround(seconds * fs_));
    if (len < 2) throw DataError("segment length is shorter than two samples");
    std::vector<TimeSeriesSet> out;
    for (Index b = 0; b + len <= samples(); b += len) out.push_back(slice(b, len));
    if (out.empty()) throw DataError("recording is shorter than one segment");
    return out;
  }

 private:
  Eigen::MatrixXd data_;
  double fs_;
  std::vector<std::string> labels_;
  std::optional<ChannelLayout> layout_;
};

/// Assignment of N channels to k clusters with ids 0..k-1.
class Partition {
 public:
  Partition() = default;

  explicit Partition(std::vector<int> assignment) : assignment_(std::move(assignment)) {
    if (assignment_.empty()) throw std::invalid_argument("partition over zero channels");
    int max_id = *std::max_element(assignment_.begin(), assignment_.end());
    if (*std::min_element(assignment_.begin(), assignment_.end()) < 0)
      throw std::invalid_argument("negative cluster id");
    std::vector<bool> used(static_cast<std::size_t>(max_id) + 1, false);
    for (int a : assignment_) used[static_cast<std::size_t>(a)] = true;
    if (std::find(used.begin(), used.end(), false) != used.end())
      throw std::invalid_argument("cluster ids must cover 0..k-1");
    k_ = max_id + 1;
  }

  /// Relabels so that cluster ids appear in order of their first channel.
  static Partition canonical(const std::vector<int>& labels) {
    std::map<int, int> remap;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto [it, inserted] = remap.try_emplace(labels[i], static_cast<int>(remap.size()));
      out[i] = it->second;
    }
    return Partition(std::move(out));
  }

  static Partition singletons(std::size_t n) {
    std::vector<int> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<int>(i);
    return Partition(std::move(a));
  }

  std::size_t size() const { return assignment_.size(); }
  int k() const { return k_; }
  int operator[](std::size_t channel) const { return assignment_[channel]; }
  const std::vector<int>& assignment() const { return assignment_; }

  bool together(std::size_t i, std::size_t j) const { return assignment_[i] == assignment_[j]; }

  std::vector<Index> members(int cluster) const {
    std::vector<Index> m;
    for (std::size_t i = 0; i < assignment_.size(); ++i)
      if (assignment_[i] == cluster) m.push_back(static_cast<Index>(i));
    return m;
  }

  /// True when both partitions induce the same co-membership relation.
  bool same_grouping(const Partition& other) const {
    if (other.size() != size()) return false;
    return canonical(assignment_).assignment_ == canonical(other.assignment_).assignment_;
  }

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.assignment_ == b.assignment_;
  }

 private:
  std::vector<int> assignment_;
  int k_ = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      cells.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell += ch;
    }
  }
  cells.push_back(cell);
  for (auto& c : cells) {
    auto b = c.find_first_not_of(" \t");
    auto e = c.find_last_not_of(" \t");
    c = b == std::string::npos ? std::string{} : c.substr(b, e - b + 1);
  }
  return cells;
}

inline double parse_number(const std::string& cell, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::logic_error&) {
    throw DataError("line " + std::to_string(line_no) + ": '" + cell + "' is not a number", line_no);
  }
}

}  // namespace detail

/// Parses the column-per-channel CSV format: a header row of channel labels,
/// optionally led by a `t` column of timestamps in seconds. Without a time
/// column the caller's `fs` is used; with one, fs is derived from its step.
inline TimeSeriesSet read_csv(std::istream& in, double fs = 100.0) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = detail::split_csv_line(line);
    break;
  }
  if (header.empty()) throw DataError("CSV input is empty");
  bool has_time = header.front() == "t" || header.front() == "time";
  std::vector<std::string> labels(header.begin() + (has_time ? 1 : 0), header.end());
  if (labels.empty()) throw DataError("line 1: no channel columns");

  std::vector<double> times;
  std::vector<std::vector<double>> cols(labels.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(cells.size()),
                      line_no);
    std::size_t c0 = 0;
    if (has_time) {
      times.push_back(detail::parse_number(cells[0], line_no));
      c0 = 1;
    }
    for (std::size_t c = 0; c < labels.size(); ++c) {
      double v = detail::parse_number(cells[c + c0], line_no);
      if (!std::isfinite(v))
        throw DataError("line " + std::to_string(line_no) + ": non-finite sample", line_no);
      cols[c].push_back(v);
    }
  }
  auto T = static_cast<Index>(cols.front().size());
  if (T < 2) throw DataError("CSV input needs at least two rows of samples");
  if (has_time) {
    double step = (times.back() - times.front()) / static_cast<double>(T - 1);
    if (!(step > 0.0)) throw DataError("time column must be increasing");
    fs = 1.0 / step;
  }
  Eigen::MatrixXd data(static_cast<Index>(labels.size()), T);
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (Index t = 0; t < T; ++t) data(static_cast<Index>(c), t) = cols[c][static_cast<std::size_t>(t)];
  return TimeSeriesSet(std::move(data), fs, std::move(labels));
}

inline TimeSeriesSet read_csv_file(const std::string& path, double fs = 100.0) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, fs);
}

/// Writes the same format read_csv accepts, with a leading `t` column.
inline void write_csv(std::ostream& out, const TimeSeriesSet& ts) {
  out << 't';
  for (auto& l : ts.labels()) out << ',' << l;
  out << '\n';
  char buf[64];
  for (Index t = 0; t < ts.samples(); ++t) {
    std::snprintf(buf, sizeof buf, "%.10g", static_cast<double>(t) / ts.fs());
    out << buf;
    for (Index c = 0; c < ts.channels(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", ts.data()(c, t));
      out << ',' << buf;
    }
    out << '\n';
  }
}

/// Layout files: `name,x,y` rows, with an optional header row.
inline ChannelLayout read_layout_csv(std::istream& in) {
  std::vector<std::pair<std::string, Point2>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != 3)
      throw DataError("line " + std::to_string(line_no) + ": layout rows are name,x,y", line_no);
    if (line_no == 1 && cells[0] == "name") continue;
    entries.push_back({cells[0], {detail::parse_number(cells[1], line_no),
                                  detail::parse_number(cells[2], line_no)}});
  }
  return ChannelLayout(std::move(entries));
}

inline void write_layout_csv(std::ostream& out, const ChannelLayout& layout) {
  out << "name,x,y\n";
  for (auto& [name, p] : layout.entries()) out << name << ',' << p.x << ',' << p.y << '\n';
}

}  // namespace hcc
