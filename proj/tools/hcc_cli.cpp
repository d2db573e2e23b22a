// hcc: batch front end for simulation, clustering, method comparison and the
// HTTP service. Exit codes: 0 success, 1 usage error, 2 data error.

#include "hcc/hcc.hpp"
#include "hcc/service.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace hcc;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

template <class Writer>
std::string render(Writer&& w) {
  std::ostringstream out;
  w(out);
  return out.str();
}

std::string numbered(const std::string& stem, std::size_t i, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04zu", i);
  return stem + buf + ext;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Static scree plot: merge dissimilarity against k, chosen k highlighted.
std::string scree_svg(const ScreeCurve& s, int chosen, const std::string& title) {
  const double W = 480, H = 300, L = 50, R = 20, T = 30, B = 40;
  int kmax = s.k.empty() ? 1 : s.k.front();
  auto x = [&](double k) { return L + (kmax <= 1 ? 0.0 : (k - 1) / (kmax - 1) * (W - L - R)); };
  auto y = [&](double d) { return H - B - d * (H - T - B); };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << title
    << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (double d : {0.0, 0.5, 1.0})
    o << "<text x=\"" << L - 6 << "\" y=\"" << fmt(y(d) + 4) << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
      << fmt(d) << "</text>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">number of clusters k</text>\n";
  o << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < s.k.size(); ++i) o << (i ? " " : "") << fmt(x(s.k[i])) << ',' << fmt(y(s.d[i]));
  o << "\"/>\n";
  for (std::size_t i = 0; i < s.k.size(); ++i) {
    bool hit = s.k[i] == chosen;
    o << "<circle cx=\"" << fmt(x(s.k[i])) << "\" cy=\"" << fmt(y(s.d[i])) << "\" r=\"" << (hit ? 4 : 2.5) << "\" fill=\""
      << (hit ? "crimson" : "steelblue") << "\"/>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::optional<int> parse_span(const std::string& text) {
  if (text == "gcv") return std::nullopt;
  try {
    std::size_t used = 0;
    int v = std::stoi(text, &used);
    if (used == text.size() && v >= 0) return v;
  } catch (const std::logic_error&) {
  }
  throw UsageError("--span must be a non-negative integer or 'gcv'");
}

std::optional<int> parse_k(const std::string& text) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    int v = std::stoi(text, &used);
    if (used == text.size() && v >= 1) return v;
  } catch (const std::logic_error&) {
  }
  throw UsageError("--k must be a positive integer or 'auto'");
}

FrequencyBand parse_band_arg(const std::string& text) {
  try {
    return parse_band(text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

Method parse_method(const std::string& text) {
  try {
    return method_from_string(text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

/// Runs `body` for each index in parallel, rethrowing the first failure in index order.
template <class F>
void run_all(std::size_t n, F&& body) {
  std::vector<std::exception_ptr> errors(n);
  parallel_for(static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  });
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// -- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string experiment;
  std::uint64_t seed = 0;
  int replicates = 1;
  std::string out;
  std::optional<double> noise_sd, modulus;
  bool clean = false;
};

void cmd_simulate(const SimulateArgs& a) {
  auto names = experiment_names();
  if (std::find(names.begin(), names.end(), a.experiment) == names.end())
    throw UsageError("unknown experiment '" + a.experiment + "'");
  if (a.replicates < 1) throw UsageError("--replicates must be at least 1");
  ExperimentOptions opt;
  if (a.noise_sd) opt.noise_sd = *a.noise_sd;
  if (a.modulus) opt.modulus = *a.modulus;
  opt.contaminate = !a.clean;
  fs::path out(a.out);
  auto n = static_cast<std::size_t>(a.replicates);
  std::vector<nlohmann::json> entries(n);
  run_all(n, [&](std::size_t i) {
    auto seed = replicate_seed(a.seed, i);
    auto e = experiment(a.experiment, seed, opt);
    auto file = numbered("replicate", i, ".csv");
    write_file(out / file, render([&](std::ostream& o) { write_csv(o, e.data); }));
    entries[i] = {{"file", file}, {"seed", seed}, {"reference", e.reference.assignment()}};
    if (i == 0 && e.data.layout())
      write_file(out / "layout.csv", render([&](std::ostream& o) { write_layout_csv(o, *e.data.layout()); }));
  });
  auto first = experiment(a.experiment, a.seed, opt);
  nlohmann::json manifest{{"command", "simulate"},
                          {"version", kVersion},
                          {"experiment", a.experiment},
                          {"seed", a.seed},
                          {"replicates", a.replicates},
                          {"options", to_json(opt)},
                          {"mixture", to_json(first.mixture)},
                          {"band", to_json(first.band)},
                          {"labels", first.data.labels()},
                          {"files", entries}};
  write_file(out / "manifest.json", json_text(manifest));
}

// -- cluster ----------------------------------------------------------------

struct ClusterArgs {
  std::string input;
  double fs = 100.0;
  std::string method = "hcc";
  std::string band = "full";
  int p = 1;
  std::string k = "auto";
  std::string span = "gcv";
  std::string kernel = "fejer";
  std::optional<double> segment_seconds;
  std::string out;
};

void cmd_cluster(const ClusterArgs& a) {
  Method method = parse_method(a.method);
  if (a.p != 1 && a.p != 2) throw UsageError("--p must be 1 or 2");
  if (method == Method::hcc_p1 && a.p == 2) method = Method::hcc_p2;
  FrequencyBand band = parse_band_arg(a.band);
  auto fixed_k = parse_k(a.k);
  SpectralOptions so;
  so.span = parse_span(a.span);
  try {
    so.family = kernel_family_from_string(a.kernel);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  auto ts = read_csv_file(a.input, a.fs);
  std::vector<TimeSeriesSet> parts;
  if (a.segment_seconds) {
    if (!(*a.segment_seconds > 0.0)) throw UsageError("--segment-seconds must be positive");
    parts = ts.segments(*a.segment_seconds);
  } else {
    parts.push_back(ts);
  }
  if (method == Method::spectral_baseline) band = FrequencyBand{0.0, ts.fs() / 2.0, "full"};
  for (auto& part : parts) {
    check_band(band, part.fs(), part.samples());
    if (so.span && 2 * *so.span + 1 > static_cast<int>(part.samples() / 2))
      throw DataError("span " + std::to_string(*so.span) + " is too wide for " + std::to_string(part.samples()) +
                      "-sample segments");
    if (fixed_k && *fixed_k > part.channels())
      throw UsageError("--k " + std::to_string(*fixed_k) + " exceeds the " + std::to_string(part.channels()) +
                       " channels");
  }

  fs::path out(a.out);
  const bool segmented = a.segment_seconds.has_value();
  std::vector<nlohmann::json> entries(parts.size());
  run_all(parts.size(), [&](std::size_t i) {
    auto est = estimate_spectra(parts[i], so);
    auto h = run_method(est, parts[i].labels(), method, band);
    auto s = scree(h);
    int suggested = suggest_k(s);
    int k = fixed_k.value_or(suggested);
    fs::path dir = segmented ? out / numbered("segment", i, "") : out;
    write_file(dir / "merges.json", json_text(to_json(h)));
    write_file(dir / "scree.csv", render([&](std::ostream& o) { write_csv(o, s); }));
    write_file(dir / "partition.json", json_text(partition_document(h, k)));
    write_file(dir / "merge_plot.csv", render([&](std::ostream& o) { write_merge_plot_csv(o, h); }));
    std::string title = std::string(to_string(method)) + " " + band.describe() + (segmented ? " segment " + std::to_string(i) : "");
    write_file(dir / "scree.svg", scree_svg(s, k, title));
    entries[i] = {{"segment", i},
                  {"dir", segmented ? numbered("segment", i, "") : std::string(".")},
                  {"start_seconds", segmented ? static_cast<double>(i) * *a.segment_seconds : 0.0},
                  {"span", est.span},
                  {"k", k},
                  {"suggested_k", suggested},
                  {"clamped", h.clamped}};
  });
  nlohmann::json manifest{{"command", "cluster"},
                          {"version", kVersion},
                          {"input", a.input},
                          {"fs", ts.fs()},
                          {"method", to_string(method)},
                          {"band", to_json(band)},
                          {"k", a.k},
                          {"span", a.span},
                          {"kernel", to_string(so.family)},
                          {"segment_seconds", a.segment_seconds ? nlohmann::json(*a.segment_seconds) : nlohmann::json()},
                          {"channels", ts.labels()},
                          {"segments", entries}};
  write_file(out / "manifest.json", json_text(manifest));
}

// -- compare ----------------------------------------------------------------

struct CompareArgs {
  std::vector<std::string> inputs;
  std::string experiment;
  std::uint64_t seed = 0;
  int replicates = 1;
  double fs = 100.0;
  std::vector<std::string> methods{"hcc", "hac", "hmc"};
  std::string band;
  int k = 2;
  std::string out;
};

void cmd_compare(const CompareArgs& a) {
  if (a.inputs.empty() == a.experiment.empty()) throw UsageError("give either --input files or --experiment");
  std::vector<Method> methods;
  for (auto& m : a.methods) methods.push_back(parse_method(m));
  if (methods.empty()) throw UsageError("--methods is empty");
  if (a.k < 1) throw UsageError("--k must be at least 1");

  std::size_t n = a.inputs.empty() ? static_cast<std::size_t>(a.replicates) : a.inputs.size();
  if (n < 1) throw UsageError("--replicates must be at least 1");
  std::optional<FrequencyBand> band;
  if (!a.band.empty()) band = parse_band_arg(a.band);
  if (!band && a.experiment.empty()) throw UsageError("--band is required with --input");
  if (!a.experiment.empty()) {
    auto names = experiment_names();
    if (std::find(names.begin(), names.end(), a.experiment) == names.end())
      throw UsageError("unknown experiment '" + a.experiment + "'");
    if (!band) band = experiment(a.experiment, a.seed).band;
  }

  // [replicate][method]
  std::vector<std::vector<Partition>> cuts(n, std::vector<Partition>(methods.size()));
  std::vector<std::vector<ScreeCurve>> screes(n, std::vector<ScreeCurve>(methods.size()));
  std::vector<std::optional<Partition>> references(n);
  std::vector<std::string> labels;
  run_all(n, [&](std::size_t r) {
    std::optional<TimeSeriesSet> ts;
    if (a.experiment.empty()) {
      ts = read_csv_file(a.inputs[r], a.fs);
    } else {
      auto e = experiment(a.experiment, replicate_seed(a.seed, r));
      ts = e.data;
      references[r] = e.reference;
    }
    if (ts->channels() < a.k) throw UsageError("--k exceeds the channel count");
    check_band(*band, ts->fs(), ts->samples());
    auto est = estimate_spectra(*ts);
    for (std::size_t m = 0; m < methods.size(); ++m) {
      auto h = run_method(est, ts->labels(), methods[m], *band);
      cuts[r][m] = cut(h, a.k);
      screes[r][m] = scree(h);
    }
    if (r == 0) labels = ts->labels();
  });
  for (std::size_t r = 1; r < n; ++r)
    if (cuts[r][0].size() != cuts[0][0].size()) throw DataError("inputs have different channel counts");

  fs::path out(a.out);
  nlohmann::json summary = nlohmann::json::array();
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::vector<Partition> ps;
    std::vector<ScreeCurve> ss;
    for (std::size_t r = 0; r < n; ++r) {
      ps.push_back(cuts[r][m]);
      ss.push_back(screes[r][m]);
    }
    auto aff = affinity(ps);
    std::string name = to_string(methods[m]);
    write_file(out / ("affinity_" + name + ".csv"), render([&](std::ostream& o) { write_csv(o, aff, labels); }));
    auto sb = scree_band(ss);
    write_file(out / ("scree_band_" + name + ".csv"), render([&](std::ostream& o) { write_csv(o, sb); }));
    std::vector<int> ks;
    for (auto& s : ss) ks.push_back(suggest_k(s));
    std::sort(ks.begin(), ks.end());
    nlohmann::json entry{{"method", name}, {"median_suggested_k", ks[ks.size() / 2]}};
    if (references[0]) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += agreement(cuts[r][m], *references[r]);
      entry["mean_ari_vs_reference"] = acc / static_cast<double>(n);
    }
    summary.push_back(entry);
  }

  std::ostringstream table;
  table << "method_a,method_b,mean_ari\n";
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t j = i + 1; j < methods.size(); ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += agreement(cuts[r][i], cuts[r][j]);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6g", acc / static_cast<double>(n));
      table << to_string(methods[i]) << ',' << to_string(methods[j]) << ',' << buf << '\n';
    }
  if (references[0]) {
    for (std::size_t m = 0; m < methods.size(); ++m) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += agreement(cuts[r][m], *references[r]);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6g", acc / static_cast<double>(n));
      table << to_string(methods[m]) << ",reference," << buf << '\n';
    }
  }
  write_file(out / "agreement.csv", table.str());

  std::vector<std::string> method_names;
  for (auto m : methods) method_names.push_back(to_string(m));
  nlohmann::json manifest{{"command", "compare"},
                          {"version", kVersion},
                          {"inputs", a.inputs},
                          {"experiment", a.experiment.empty() ? nlohmann::json() : nlohmann::json(a.experiment)},
                          {"seed", a.seed},
                          {"replicates", n},
                          {"methods", method_names},
                          {"band", to_json(*band)},
                          {"k", a.k},
                          {"labels", labels},
                          {"summary", summary}};
  write_file(out / "manifest.json", json_text(manifest));
}

// -- serve ------------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string store;
  double max_body_mb = 256;
};

void cmd_serve(const ServeArgs& a) {
  ServiceOptions opt;
  opt.max_body_bytes = static_cast<std::size_t>(a.max_body_mb * 1024.0 * 1024.0);
  if (!a.store.empty()) opt.store = fs::path(a.store);
  Service service(opt);
  httplib::Server server;
  bind(server, service);
  std::cerr << "hcc " << kVersion << " listening on http://" << a.host << ':' << a.port << "/v1\n";
  if (!server.listen(a.host, a.port)) throw DataError("cannot listen on " + a.host + ":" + std::to_string(a.port));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical cluster-coherence toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = OpenMP default)");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "generate replicates of a simulation design");
  simulate->add_option("--experiment", sim.experiment, "design name")->required();
  simulate->add_option("--seed", sim.seed, "base seed; replicate i uses seed + i");
  simulate->add_option("--replicates", sim.replicates, "number of replicates");
  simulate->add_option("--out", sim.out, "output directory")->required();
  simulate->add_option("--noise-sd", sim.noise_sd, "channel noise sd override");
  simulate->add_option("--modulus", sim.modulus, "AR(2) root modulus override");
  simulate->add_flag("--clean", sim.clean, "skip blink contamination in the artifact design");

  ClusterArgs cl;
  auto* cluster = app.add_subcommand("cluster", "cluster a CSV recording");
  cluster->add_option("--input", cl.input, "CSV file, one column per channel")->required();
  cluster->add_option("--fs", cl.fs, "sampling rate when the CSV has no t column");
  cluster->add_option("--method", cl.method, "hcc | hac | hmc | spectral-baseline");
  cluster->add_option("--band", cl.band, "band name or lo,hi in Hz");
  cluster->add_option("--p", cl.p, "cluster coherence order (1 or 2)");
  cluster->add_option("--k", cl.k, "number of clusters or 'auto'");
  cluster->add_option("--span", cl.span, "smoothing span or 'gcv'");
  cluster->add_option("--kernel", cl.kernel, "fejer | daniell");
  cluster->add_option("--segment-seconds", cl.segment_seconds, "analyse disjoint segments of this length");
  cluster->add_option("--out", cl.out, "output directory")->required();

  CompareArgs cmp;
  auto* compare = app.add_subcommand("compare", "affinity and agreement across methods and replicates");
  compare->add_option("--input", cmp.inputs, "CSV files, one per replicate");
  compare->add_option("--experiment", cmp.experiment, "simulate replicates of this design instead");
  compare->add_option("--seed", cmp.seed, "base seed for --experiment");
  compare->add_option("--replicates", cmp.replicates, "replicates for --experiment");
  compare->add_option("--fs", cmp.fs, "sampling rate when a CSV has no t column");
  compare->add_option("--methods", cmp.methods, "methods to compare")->delimiter(',');
  compare->add_option("--band", cmp.band, "band name or lo,hi (defaults to the design's band)");
  compare->add_option("--k", cmp.k, "number of clusters");
  compare->add_option("--out", cmp.out, "output directory")->required();

  ServeArgs sv;
  if (const char* h = std::getenv("HCC_HOST")) sv.host = h;
  if (const char* p = std::getenv("HCC_PORT")) sv.port = std::atoi(p);
  if (const char* s = std::getenv("HCC_STORE")) sv.store = s;
  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  serve->add_option("--host", sv.host, "bind address (env HCC_HOST)");
  serve->add_option("--port", sv.port, "port (env HCC_PORT)");
  serve->add_option("--store", sv.store, "persistence directory (env HCC_STORE)");
  serve->add_option("--max-body-mb", sv.max_body_mb, "upload limit in MiB");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    set_thread_count(threads);
    if (*simulate) cmd_simulate(sim);
    if (*cluster) cmd_cluster(cl);
    if (*compare) cmd_compare(cmp);
    if (*serve) cmd_serve(sv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
