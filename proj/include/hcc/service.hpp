#pragma once

// The /v1 HTTP API. Service::handle is a transport-free router so it can be
// exercised directly; bind() mounts it on a cpp-httplib server.

#include "hcc/clustering.hpp"
#include "hcc/core.hpp"
#include "hcc/pipeline.hpp"
#include "hcc/simgen.hpp"
#include "hcc/spectral.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace hcc {

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

struct ServiceOptions {
  std::size_t max_body_bytes = std::size_t{256} << 20;
  std::optional<std::filesystem::path> store;  // content-addressed files, reloaded on lookup misses
  std::size_t estimate_cache = 4;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex_id(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct HttpError : std::runtime_error {
  HttpError(int s, const std::string& what) : std::runtime_error(what), status(s) {}
  int status;
};

inline std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    auto j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    if (j > i) parts.emplace_back(path.substr(i, j - i));
    i = j + 1;
  }
  return parts;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spill(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace detail

class Service {
 public:
  using Query = std::map<std::string, std::string>;

  explicit Service(ServiceOptions opt = {}) : opt_(std::move(opt)) {
    worker_ = std::thread([this] { work(); });
  }

  ~Service() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    worker_.join();
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const ServiceOptions& options() const { return opt_; }

  Response handle(const std::string& method, const std::string& path, const Query& query = {},
                  const std::string& body = {}, const std::string& content_type = {}) {
    try {
      return route(method, detail::split_path(path), query, body, content_type);
    } catch (const detail::HttpError& e) {
      return error(e.status, e.what());
    } catch (const DataError& e) {
      return error(422, e.what());
    } catch (const std::exception& e) {
      return error(500, e.what());
    }
  }

  /// Blocks until the run has finished or failed.
  void wait(const std::string& run_id) {
    std::unique_lock lock(mu_);
    auto it = runs_.find(run_id);
    if (it == runs_.end()) return;
    auto run = it->second;
    done_cv_.wait(lock, [&] { return run->state == RunState::done || run->state == RunState::failed; });
  }

 private:
  struct Dataset {
    std::string id;
    std::string source;
    TimeSeriesSet data;
    std::optional<Partition> reference;
    std::optional<FrequencyBand> band;
  };

  struct Segment {
    double seconds = 0.0;
    int index = 0;
  };

  struct RunParams {
    Method method = Method::hcc_p1;
    FrequencyBand band;
    std::optional<Segment> segment;
    std::optional<int> span;

    nlohmann::json canonical() const {
      nlohmann::json j;
      j["method"] = to_string(method);
      j["band"] = to_json(band);
      j["segment"] = segment ? nlohmann::json{{"seconds", segment->seconds}, {"index", segment->index}} : nlohmann::json();
      j["span"] = span ? nlohmann::json(*span) : nlohmann::json("gcv");
      return j;
    }
  };

  enum class RunState { queued, running, done, failed };

  static const char* state_name(RunState s) {
    switch (s) {
      case RunState::queued: return "queued";
      case RunState::running: return "running";
      case RunState::done: return "done";
      case RunState::failed: return "failed";
    }
    return "?";
  }

  struct Run {
    std::string id;
    std::string dataset;
    RunParams params;
    RunState state = RunState::queued;
    std::string error;
    MergeHistory history;
    Eigen::MatrixXd band_matrix;
    std::vector<double> freqs;
    Eigen::MatrixXd auto_spectra;  // bins x channels
    int span = 0;
  };

  // -- plumbing ---------------------------------------------------------------

  static Response json_response(int status, const nlohmann::json& j) { return {status, json_text(j)}; }

  static Response error(int status, const std::string& message) {
    return json_response(status, {{"status", status}, {"error", message}});
  }

  static std::optional<std::string> param(const Query& q, const std::string& key) {
    auto it = q.find(key);
    if (it == q.end() || it->second.empty()) return std::nullopt;
    return it->second;
  }

  static int parse_int(const std::string& text, const std::string& what) {
    try {
      std::size_t used = 0;
      int v = std::stoi(text, &used);
      if (used == text.size()) return v;
    } catch (const std::logic_error&) {
    }
    throw detail::HttpError(400, what + " must be an integer, got '" + text + "'");
  }

  static double parse_double(const std::string& text, const std::string& what) {
    try {
      std::size_t used = 0;
      double v = std::stod(text, &used);
      if (used == text.size()) return v;
    } catch (const std::logic_error&) {
    }
    throw detail::HttpError(400, what + " must be a number, got '" + text + "'");
  }

  static FrequencyBand band_of(const nlohmann::json& j) {
    try {
      if (j.is_string()) return parse_band(j.get<std::string>());
      if (j.is_object()) return make_band(j.at("lo").get<double>(), j.at("hi").get<double>(), j.value("name", ""));
      if (j.is_array() && j.size() == 2) return make_band(j[0].get<double>(), j[1].get<double>());
    } catch (const std::exception& e) {
      throw detail::HttpError(422, e.what());
    }
    throw detail::HttpError(422, "band must be a name, \"lo,hi\", [lo, hi] or {lo, hi}");
  }

  // -- routing ----------------------------------------------------------------

  Response route(const std::string& method, const std::vector<std::string>& p, const Query& q,
                 const std::string& body, const std::string& content_type) {
    if (p.empty() || p[0] != "v1") throw detail::HttpError(404, "no such endpoint");
    auto want = [&](const char* m) {
      if (method != m) throw detail::HttpError(405, "method " + method + " not allowed here");
    };
    if (p.size() == 2 && p[1] == "health") {
      want("GET");
      return json_response(200, {{"status", "ok"}});
    }
    if (p.size() == 2 && p[1] == "experiments") {
      want("GET");
      return json_response(200, {{"experiments", experiment_names()}});
    }
    if (p.size() >= 2 && p[1] == "datasets") {
      if (p.size() == 2) {
        if (method == "POST") return post_dataset(q, body, content_type);
        want("GET");
        std::lock_guard lock(mu_);
        auto ids = nlohmann::json::array();
        for (auto& [id, d] : datasets_) ids.push_back(id);
        return json_response(200, {{"datasets", ids}});
      }
      auto ds = dataset(p[2]);
      if (p.size() == 3) {
        want("GET");
        return json_response(200, describe(*ds));
      }
      if (p.size() == 4 && p[3] == "layout") {
        want("GET");
        return json_response(200, layout_of(*ds));
      }
      if (p.size() == 4 && p[3] == "coherence") {
        want("GET");
        return dataset_coherence(*ds, q);
      }
      if (p.size() == 4 && p[3] == "cluster") {
        want("POST");
        return post_cluster(ds, body);
      }
    }
    if (p.size() >= 3 && p[1] == "runs") {
      want("GET");
      auto run = find_run(p[2]);
      if (p.size() == 3) return json_response(200, status_of(*run));
      if (p.size() == 4) return run_view(*run, p[3], q);
    }
    throw detail::HttpError(404, "no such endpoint");
  }

  // -- datasets ---------------------------------------------------------------

  Response post_dataset(const Query& q, const std::string& body, const std::string& content_type) {
    if (body.size() > opt_.max_body_bytes)
      throw detail::HttpError(413, "body of " + std::to_string(body.size()) + " bytes exceeds the limit of " +
                                       std::to_string(opt_.max_body_bytes));
    auto first = body.find_first_not_of(" \t\r\n");
    bool is_json = content_type.rfind("application/json", 0) == 0 || (first != std::string::npos && body[first] == '{');
    std::shared_ptr<Dataset> ds;
    std::string stored;
    std::string ext;
    if (is_json) {
      nlohmann::json spec;
      try {
        spec = nlohmann::json::parse(body);
      } catch (const nlohmann::json::exception& e) {
        throw detail::HttpError(400, std::string("malformed JSON: ") + e.what());
      }
      ds = dataset_from_spec(spec);
      stored = json_text(spec_canonical(spec));
      ext = ".json";
    } else {
      double fs = 100.0;
      if (auto v = param(q, "fs")) fs = parse_double(*v, "fs");
      if (!(fs > 0.0)) throw detail::HttpError(400, "fs must be positive");
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", fs);
      std::string id = detail::hex_id(detail::fnv1a(std::string("csv:") + buf + ":" + body));
      if (auto hit = cached_dataset(id)) return json_response(200, describe(*hit));
      std::istringstream in(body);
      try {
        ds = std::make_shared<Dataset>(Dataset{id, "csv", attach_layout(read_csv(in, fs)), {}, {}});
      } catch (const DataError& e) {
        nlohmann::json j{{"status", 400}, {"error", e.what()}};
        if (e.line()) j["line"] = e.line();
        return json_response(400, j);
      }
      std::ostringstream out;
      write_csv(out, ds->data);
      stored = out.str();
      ext = ".csv";
    }
    bool created = false;
    {
      std::lock_guard lock(mu_);
      auto [it, inserted] = datasets_.emplace(ds->id, ds);
      created = inserted;
      ds = it->second;
    }
    if (created && opt_.store) detail::spill(*opt_.store / "datasets" / (ds->id + ext), stored);
    return json_response(created ? 201 : 200, describe(*ds));
  }

  static nlohmann::json spec_canonical(const nlohmann::json& spec) {
    if (spec.contains("experiment")) {
      auto opt = experiment_options_from_json(spec.value("options", nlohmann::json::object()));
      return {{"experiment", spec.at("experiment")}, {"seed", spec.value("seed", std::uint64_t{0})}, {"options", to_json(opt)}};
    }
    return {{"mixture", to_json(mixture_from_json(spec.at("mixture")))}};
  }

  std::shared_ptr<Dataset> dataset_from_spec(const nlohmann::json& spec) {
    nlohmann::json canon;
    try {
      if (!spec.is_object() || (!spec.contains("experiment") && !spec.contains("mixture")))
        throw detail::HttpError(400, "JSON datasets need an \"experiment\" or \"mixture\" field");
      canon = spec_canonical(spec);
    } catch (const nlohmann::json::exception& e) {
      throw detail::HttpError(400, std::string("malformed dataset spec: ") + e.what());
    }
    std::string id = detail::hex_id(detail::fnv1a("json:" + canon.dump()));
    if (auto hit = cached_dataset(id)) return hit;
    try {
      if (canon.contains("experiment")) {
        auto name = canon.at("experiment").get<std::string>();
        auto known = experiment_names();
        if (std::find(known.begin(), known.end(), name) == known.end())
          throw detail::HttpError(400, "unknown experiment '" + name + "'");
        auto e = experiment(name, canon.at("seed").get<std::uint64_t>(),
                            experiment_options_from_json(canon.at("options")));
        return std::make_shared<Dataset>(Dataset{id, "experiment", std::move(e.data), std::move(e.reference), e.band});
      }
      auto m = mixture_from_json(canon.at("mixture"));
      auto ts = simulate_mixture(m);
      return std::make_shared<Dataset>(Dataset{id, "mixture", attach_layout(std::move(ts)), dominant_loading(m.mixing), {}});
    } catch (const DataError& e) {
      throw detail::HttpError(400, e.what());
    } catch (const std::invalid_argument& e) {
      throw detail::HttpError(400, e.what());
    } catch (const nlohmann::json::exception& e) {
      throw detail::HttpError(400, std::string("malformed dataset spec: ") + e.what());
    }
  }

  /// Series whose labels are all 10-20 names get the standard scalp layout.
  static TimeSeriesSet attach_layout(TimeSeriesSet ts) {
    if (ts.layout()) return ts;
    auto layout = standard_1020_layout();
    for (auto& l : ts.labels())
      if (!layout.contains(l)) return ts;
    return ts.with_layout(layout);
  }

  std::shared_ptr<Dataset> cached_dataset(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = datasets_.find(id);
    return it == datasets_.end() ? nullptr : it->second;
  }

  std::shared_ptr<Dataset> dataset(const std::string& id) {
    if (auto hit = cached_dataset(id)) return hit;
    if (opt_.store) {
      auto dir = *opt_.store / "datasets";
      std::shared_ptr<Dataset> ds;
      if (std::filesystem::exists(dir / (id + ".json"))) {
        ds = dataset_from_spec(nlohmann::json::parse(detail::slurp(dir / (id + ".json"))));
      } else if (std::filesystem::exists(dir / (id + ".csv"))) {
        ds = std::make_shared<Dataset>(Dataset{id, "csv", attach_layout(read_csv_file((dir / (id + ".csv")).string())), {}, {}});
      }
      if (ds && ds->id == id) {
        std::lock_guard lock(mu_);
        return datasets_.emplace(id, ds).first->second;
      }
    }
    throw detail::HttpError(404, "unknown dataset '" + id + "'");
  }

  static nlohmann::json describe(const Dataset& d) {
    nlohmann::json j;
    j["id"] = d.id;
    j["source"] = d.source;
    j["channels"] = d.data.channels();
    j["samples"] = d.data.samples();
    j["fs"] = d.data.fs();
    j["duration"] = d.data.duration();
    j["labels"] = d.data.labels();
    j["has_layout"] = d.data.layout().has_value();
    j["reference"] = d.reference ? nlohmann::json(d.reference->assignment()) : nlohmann::json();
    j["band"] = d.band ? to_json(*d.band) : nlohmann::json();
    return j;
  }

  static nlohmann::json layout_of(const Dataset& d) {
    auto channels = nlohmann::json::array();
    for (auto& l : d.data.labels()) {
      nlohmann::json c{{"name", l}, {"x", nullptr}, {"y", nullptr}};
      if (d.data.layout()) {
        auto pos = d.data.layout()->at(l);
        c["x"] = pos.x;
        c["y"] = pos.y;
      }
      channels.push_back(std::move(c));
    }
    return {{"dataset", d.id}, {"has_layout", d.data.layout().has_value()}, {"channels", std::move(channels)}};
  }

  static std::optional<Segment> segment_of(const Query& q) {
    auto seconds = param(q, "segment_seconds");
    auto index = param(q, "segment");
    if (!seconds) {
      if (index) throw detail::HttpError(422, "segment needs segment_seconds");
      return std::nullopt;
    }
    Segment s{parse_double(*seconds, "segment_seconds"), index ? parse_int(*index, "segment") : 0};
    return s;
  }

  static TimeSeriesSet select(const Dataset& d, const std::optional<Segment>& seg) {
    if (!seg) return d.data;
    if (!(seg->seconds > 0.0)) throw detail::HttpError(422, "segment length must be positive");
    std::vector<TimeSeriesSet> parts;
    try {
      parts = d.data.segments(seg->seconds);
    } catch (const DataError& e) {
      throw detail::HttpError(422, e.what());
    }
    if (seg->index < 0 || seg->index >= static_cast<int>(parts.size()))
      throw detail::HttpError(422, "segment " + std::to_string(seg->index) + " outside 0.." +
                                       std::to_string(parts.size() - 1));
    return parts[static_cast<std::size_t>(seg->index)];
  }

  static void check_span(const TimeSeriesSet& ts, const std::optional<int>& span) {
    if (!span) return;
    auto J = static_cast<int>(ts.samples() / 2);
    if (*span < 0 || 2 * *span + 1 > J)
      throw detail::HttpError(422, "span " + std::to_string(*span) + " is not legal for " +
                                       std::to_string(ts.samples()) + "-sample series");
  }

  std::shared_ptr<const SpectralEstimate> estimate(const Dataset& d, const std::optional<Segment>& seg,
                                                   const std::optional<int>& span) {
    std::string key = d.id + "|" + (seg ? std::to_string(seg->seconds) + ":" + std::to_string(seg->index) : "-") +
                      "|" + (span ? std::to_string(*span) : "gcv");
    {
      std::lock_guard lock(mu_);
      auto it = estimates_.find(key);
      if (it != estimates_.end()) return it->second;
    }
    SpectralOptions so;
    so.span = span;
    auto est = std::make_shared<const SpectralEstimate>(estimate_spectra(select(d, seg), so));
    std::lock_guard lock(mu_);
    if (estimates_.emplace(key, est).second) {
      estimate_order_.push_back(key);
      while (estimate_order_.size() > opt_.estimate_cache) {
        estimates_.erase(estimate_order_.front());
        estimate_order_.pop_front();
      }
    }
    return est;
  }

  Response dataset_coherence(const Dataset& d, const Query& q) {
    auto b = param(q, "band");
    if (!b) throw detail::HttpError(422, "band is required");
    auto band = band_of(nlohmann::json(*b));
    auto seg = segment_of(q);
    std::optional<int> span;
    if (auto s = param(q, "span"); s && *s != "gcv") span = parse_int(*s, "span");
    auto ts = select(d, seg);
    check_band(band, ts.fs(), ts.samples());
    check_span(ts, span);
    auto est = estimate(d, seg, span);
    Eigen::MatrixXd M = integrate_band(est->coherence, band);
    return json_response(200, {{"dataset", d.id},
                               {"band", to_json(band)},
                               {"span", est->span},
                               {"labels", d.data.labels()},
                               {"matrix", rows_of(M)}});
  }

  static std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& M) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(M.rows()));
    for (Index r = 0; r < M.rows(); ++r)
      for (Index c = 0; c < M.cols(); ++c) rows[static_cast<std::size_t>(r)].push_back(M(r, c));
    return rows;
  }

  // -- runs -------------------------------------------------------------------

  Response post_cluster(const std::shared_ptr<Dataset>& ds, const std::string& body) {
    nlohmann::json req = nlohmann::json::object();
    if (body.find_first_not_of(" \t\r\n") != std::string::npos) {
      try {
        req = nlohmann::json::parse(body);
      } catch (const nlohmann::json::exception& e) {
        throw detail::HttpError(400, std::string("malformed JSON: ") + e.what());
      }
      if (!req.is_object()) throw detail::HttpError(400, "cluster request must be a JSON object");
    }
    RunParams params;
    try {
      params.method = method_from_string(req.value("method", std::string("hcc")));
      int p = req.value("p", 1);
      if (p != 1 && p != 2) throw detail::HttpError(400, "p must be 1 or 2");
      if (params.method == Method::hcc_p1 && p == 2) params.method = Method::hcc_p2;
      if (req.contains("segment") && !req["segment"].is_null()) {
        auto& s = req["segment"];
        params.segment = Segment{s.at("seconds").get<double>(), s.value("index", 0)};
      }
      if (req.contains("span") && !req["span"].is_null() && req["span"] != "gcv")
        params.span = req["span"].get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw detail::HttpError(400, std::string("malformed cluster request: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw detail::HttpError(400, e.what());
    }
    auto ts = select(*ds, params.segment);
    if (params.method == Method::spectral_baseline && !req.contains("band")) {
      params.band = FrequencyBand{0.0, ts.fs() / 2.0, "full"};
    } else {
      if (!req.contains("band")) throw detail::HttpError(422, "band is required");
      params.band = band_of(req["band"]);
    }
    check_band(params.band, ts.fs(), ts.samples());
    check_span(ts, params.span);
    std::string id = detail::hex_id(detail::fnv1a(ds->id + "|" + params.canonical().dump()));
    std::shared_ptr<Run> run;
    {
      std::lock_guard lock(mu_);
      auto [it, inserted] = runs_.emplace(id, nullptr);
      if (inserted) {
        it->second = std::make_shared<Run>();
        it->second->id = id;
        it->second->dataset = ds->id;
        it->second->params = params;
        queue_.push_back(id);
      }
      run = it->second;
    }
    cv_.notify_all();
    if (opt_.store)
      detail::spill(*opt_.store / "runs" / (id + ".json"),
                    json_text({{"dataset", ds->id}, {"params", params.canonical()}}));
    std::lock_guard lock(mu_);
    return json_response(202, status_locked(*run));
  }

  std::shared_ptr<Run> find_run(const std::string& id) {
    {
      std::lock_guard lock(mu_);
      auto it = runs_.find(id);
      if (it != runs_.end()) return it->second;
    }
    if (opt_.store && std::filesystem::exists(*opt_.store / "runs" / (id + ".json"))) {
      auto saved = nlohmann::json::parse(detail::slurp(*opt_.store / "runs" / (id + ".json")));
      auto ds = dataset(saved.at("dataset").get<std::string>());
      auto& p = saved.at("params");
      nlohmann::json req{{"method", p.at("method")}, {"band", p.at("band")}, {"segment", p.at("segment")}, {"span", p.at("span")}};
      post_cluster(ds, req.dump());
      std::lock_guard lock(mu_);
      auto it = runs_.find(id);
      if (it != runs_.end()) return it->second;
    }
    throw detail::HttpError(404, "unknown run '" + id + "'");
  }

  nlohmann::json status_locked(const Run& r) const {
    nlohmann::json j{{"run", r.id}, {"dataset", r.dataset}, {"status", state_name(r.state)}, {"params", r.params.canonical()}};
    if (r.state == RunState::failed) j["error"] = r.error;
    if (r.state == RunState::done) {
      j["channels"] = r.history.channels;
      j["span"] = r.span;
      j["suggested_k"] = suggest_k(scree(r.history));
    }
    return j;
  }

  nlohmann::json status_of(const Run& r) {
    std::lock_guard lock(mu_);
    return status_locked(r);
  }

  Response run_view(Run& r, const std::string& view, const Query& q) {
    {
      std::lock_guard lock(mu_);
      if (r.state == RunState::failed) return error(422, r.error);
      if (r.state != RunState::done) return json_response(202, status_locked(r));
    }
    // A finished run is immutable, so it can be read without the lock.
    const auto& h = r.history;
    if (view == "scree") {
      if (param(q, "format") == std::optional<std::string>("csv")) {
        std::ostringstream out;
        write_csv(out, scree(h));
        return {200, out.str(), "text/csv"};
      }
      return json_response(200, scree_document(h));
    }
    if (view == "merges") return json_response(200, to_json(h));
    if (view == "partition" || view == "coherence" || view == "spectra") {
      int k = suggest_k(scree(h));
      if (auto v = param(q, "k")) k = parse_int(*v, "k");
      if (k < 1) throw detail::HttpError(400, "k must be at least 1");
      if (k > h.channels)
        throw detail::HttpError(409, "k=" + std::to_string(k) + " exceeds the " + std::to_string(h.channels) + " channels");
      if (view == "partition") return json_response(200, partition_document(h, k));
      auto name = param(q, "channel");
      if (!name) throw detail::HttpError(400, "channel is required");
      std::optional<Index> focal;
      for (std::size_t i = 0; i < h.labels.size(); ++i)
        if (ChannelLayout::equal_names(h.labels[i], *name)) focal = static_cast<Index>(i);
      if (!focal) throw detail::HttpError(404, "unknown channel '" + *name + "'");
      auto part = cut(h, k);
      auto members = part.members(part[static_cast<std::size_t>(*focal)]);
      std::vector<std::string> labels;
      for (Index m : members) labels.push_back(h.labels[static_cast<std::size_t>(m)]);
      nlohmann::json j{{"channel", h.labels[static_cast<std::size_t>(*focal)]}, {"k", k}, {"members", labels}};
      if (view == "coherence") {
        j["band"] = to_json(h.band);
        Eigen::MatrixXd sub(static_cast<Index>(members.size()), static_cast<Index>(members.size()));
        for (std::size_t a = 0; a < members.size(); ++a)
          for (std::size_t b = 0; b < members.size(); ++b)
            sub(static_cast<Index>(a), static_cast<Index>(b)) = r.band_matrix(members[a], members[b]);
        j["matrix"] = rows_of(sub);
      } else {
        j["freqs"] = r.freqs;
        auto curves = nlohmann::json::array();
        for (Index m : members) {
          std::vector<double> c(static_cast<std::size_t>(r.auto_spectra.rows()));
          for (Index b = 0; b < r.auto_spectra.rows(); ++b) c[static_cast<std::size_t>(b)] = r.auto_spectra(b, m);
          curves.push_back(std::move(c));
        }
        j["spectra"] = std::move(curves);
      }
      return json_response(200, j);
    }
    throw detail::HttpError(404, "no such run view '" + view + "'");
  }

  void work() {
    for (;;) {
      std::shared_ptr<Run> run;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
        if (stop_) return;
        run = runs_.at(queue_.front());
        queue_.pop_front();
        run->state = RunState::running;
      }
      execute(*run);
      done_cv_.notify_all();
    }
  }

  void execute(Run& run) {
    MergeHistory h;
    Eigen::MatrixXd band_matrix, spectra;
    std::vector<double> freqs;
    int span = 0;
    std::string failure;
    try {
      auto ds = dataset(run.dataset);
      auto est = estimate(*ds, run.params.segment, run.params.span);
      h = run_method(*est, ds->data.labels(), run.params.method, run.params.band);
      band_matrix = integrate_band(est->coherence, run.params.band);
      spectra = est->smoothed.diagonals();
      freqs = est->smoothed.freqs;
      span = est->span;
    } catch (const std::exception& e) {
      failure = e.what();
    }
    std::lock_guard lock(mu_);
    if (failure.empty()) {
      run.history = std::move(h);
      run.band_matrix = std::move(band_matrix);
      run.auto_spectra = std::move(spectra);
      run.freqs = std::move(freqs);
      run.span = span;
      run.state = RunState::done;
    } else {
      run.error = failure;
      run.state = RunState::failed;
    }
  }

  ServiceOptions opt_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  bool stop_ = false;
  std::map<std::string, std::shared_ptr<Dataset>> datasets_;
  std::map<std::string, std::shared_ptr<Run>> runs_;
  std::deque<std::string> queue_;
  std::map<std::string, std::shared_ptr<const SpectralEstimate>> estimates_;
  std::deque<std::string> estimate_order_;
  std::thread worker_;
};

/// Mounts the service on `server` under /v1, with permissive CORS for the web UI.
inline void bind(httplib::Server& server, Service& service) {
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    Service::Query q;
    for (auto& [k, v] : req.params) q.emplace(k, v);
    auto r = service.handle(req.method, req.path, q, req.body, req.get_header_value("Content-Type"));
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body, r.content_type);
  };
  server.Get(R"(/v1/.*)", forward);
  server.Post(R"(/v1/.*)", forward);
  server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  server.set_payload_max_length(service.options().max_body_bytes);
}

}  // namespace hcc
