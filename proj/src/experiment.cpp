// Copyright 2026 The CIT Workbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cit/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cit/errors.hpp"
#include "cit/metrics.hpp"
#include "cit/rng.hpp"
#include "cit/theory.hpp"

namespace cit {
namespace {

namespace fs = std::filesystem;

constexpr std::string_view kHeader = "cit-spec 1";

std::string fmt(const char* pattern, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, x);
  return buf;
}

// Shortest text that parses back to the same double.
std::string g17(double x) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return ec == std::errc() ? std::string(buf, end) : fmt("%.17g", x);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(std::string_view(s).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

// ---- value codecs ---------------------------------------------------------

struct FieldError {
  std::string expected;
};

double decode_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw FieldError{"a finite number"};
  return v;
}

std::uint64_t decode_uint(const std::string& s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw FieldError{"a non-negative integer"};
  return v;
}

void decode(const std::string& s, double& out) { out = decode_double(s); }
void decode(const std::string& s, std::uint64_t& out) { out = decode_uint(s); }
void decode(const std::string& s, std::string& out) { out = s; }

void decode(const std::string& s, bool& out) {
  if (s == "true") out = true;
  else if (s == "false") out = false;
  else throw FieldError{"true or false"};
}

void decode(const std::string& s, ExperimentKind& out) {
  for (auto k : {ExperimentKind::SbmShift, ExperimentKind::Perturb, ExperimentKind::SingleTrain,
                 ExperimentKind::TheoryCheck, ExperimentKind::Sweep}) {
    if (s == kind_name(k)) {
      out = k;
      return;
    }
  }
  throw FieldError{"one of sbm_shift, perturb, single_train, theory_check, sweep"};
}

void decode(const std::string& s, ShiftPoint& out) {
  const auto parts = split_list(s, ':');
  if (parts.size() != 2) throw FieldError{"inter:intra probability pairs"};
  out = {decode_double(parts[0]), decode_double(parts[1])};
}

void decode(const std::string& s, PerturbStep& out) {
  const auto parts = split_list(s, ':');
  if (parts.size() != 2) throw FieldError{"op:ratio pairs"};
  out = {parts[0], decode_double(parts[1])};
}

template <class T>
void decode(const std::string& s, std::vector<T>& out) {
  out.clear();
  for (const auto& item : split_list(s, ',')) {
    T v{};
    decode(item, v);
    out.push_back(std::move(v));
  }
}

std::string encode(double v) { return g17(v); }
std::string encode(std::uint64_t v) { return std::to_string(v); }
std::string encode(const std::string& v) { return v; }
std::string encode(bool v) { return v ? "true" : "false"; }
std::string encode(ExperimentKind k) { return std::string(kind_name(k)); }
std::string encode(const ShiftPoint& v) { return g17(v.p_inter) + ":" + g17(v.p_intra); }
std::string encode(const PerturbStep& v) { return v.op + ":" + g17(v.ratio); }

template <class T>
std::string encode(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + encode(v[i]);
  return out;
}

// ---- field table ----------------------------------------------------------

// The one list of spec keys, shared by the reader and the writer.
template <class Spec, class Visitor>
void visit_fields(Spec& s, Visitor& v) {
  v("kind", s.kind);
  v("name", s.name);
  v("seeds", s.seeds);
  v("baseline", s.baseline);
  v("threads", s.threads);

  v("data.source", s.data.source);
  v("data.sbm.block_sizes", s.data.sbm.block_sizes);
  v("data.sbm.p_inter", s.data.sbm.p_inter);
  v("data.sbm.p_intra", s.data.sbm.p_intra);
  v("data.sbm.feature_dim", s.data.sbm.feature_dim);
  v("data.sbm.separation", s.data.sbm.separation);
  v("data.sbm.class_std", s.data.sbm.class_std);
  v("data.files.edges", s.data.edges);
  v("data.files.features", s.data.features);
  v("data.files.labels", s.data.labels);
  v("data.files.split", s.data.split);
  v("data.split.train_per_class", s.data.train_per_class);
  v("data.split.val_count", s.data.val_count);

  v("cit.enabled", s.cit.enabled);
  v("cit.m", s.cit.m);
  v("cit.p", s.cit.p);
  v("cit.k_period", s.cit.k_period);
  v("cit.alpha_f", s.cit.alpha_f);
  v("cit.alpha_c", s.cit.alpha_c);
  v("cit.alpha_o", s.cit.alpha_o);
  v("cit.noise", s.cit.noise);
  v("cit.scalar_noise", s.cit.scalar_noise);
  v("cit.unnormalized_stats", s.cit.unnormalized_stats);
  v("cit.literal_eq11", s.cit.literal_eq11);
  v("cit.cluster_loss_on_transferred", s.cit.cluster_loss_on_transferred);
  v("cit.lr", s.cit.lr);
  v("cit.weight_decay", s.cit.weight_decay);
  v("cit.dropout", s.cit.dropout);
  v("cit.epochs", s.cit.epochs);
  v("cit.patience", s.cit.patience);
  v("cit.hidden_dim", s.cit.hidden_dim);
  v("cit.layers", s.cit.layers);

  v("schedule.shift", s.shift);
  v("schedule.perturb", s.perturb);

  v("sweep.param", s.sweep.param);
  v("sweep.values", s.sweep.values);

  v("theory.p", s.theory.p_grid);
  v("theory.worlds", s.theory.worlds);
  v("theory.dims", s.theory.dims);
  v("theory.samples", s.theory.samples);
  v("theory.seed", s.theory.seed);
}

struct Entry {
  std::string value;
  std::size_t line;
  bool used = false;
};

struct Reader {
  std::map<std::string, Entry>& entries;

  template <class T>
  void operator()(const char* key, T& field) {
    auto it = entries.find(key);
    if (it == entries.end()) return;
    it->second.used = true;
    try {
      decode(it->second.value, field);
    } catch (const FieldError& e) {
      throw ValidationError(std::string(key) + " (line " + std::to_string(it->second.line) +
                            "): expected " + e.expected + ", got '" + it->second.value + "'");
    }
  }
};

struct Writer {
  std::string out;
  std::string group;

  template <class T>
  void operator()(const char* key, const T& field) {
    const std::string k = key;
    const std::string g = k.substr(0, k.find('.'));
    if (!out.empty() && g != group && k.find('.') != std::string::npos) out += '\n';
    group = g;
    const std::string value = encode(field);
    out += k + " =" + (value.empty() ? "" : " " + value) + '\n';
  }
};

// ---- graphs ---------------------------------------------------------------

std::vector<std::vector<double>> block_probs(std::size_t blocks, double inter, double intra) {
  std::vector<std::vector<double>> p(blocks, std::vector<double>(blocks, inter));
  for (std::size_t b = 0; b < blocks; ++b) p[b][b] = intra;
  return p;
}

Graph sbm_graph(const ExperimentSpec& s, std::uint64_t seed, ShiftPoint probs) {
  const SbmPreset& pre = s.data.sbm;
  SbmSpec spec;
  spec.block_sizes = pre.block_sizes;
  spec.edge_prob = block_probs(pre.block_sizes.size(), probs.p_inter, probs.p_intra);
  spec.feature_dim = pre.feature_dim;
  spec.class_means = make_class_means(pre.block_sizes.size(), pre.feature_dim, pre.separation, seed);
  spec.class_std = pre.class_std;
  spec.seed = seed;
  Graph g = sbm_generate(spec);
  g.split = split_nodes(g, s.data.train_per_class, s.data.val_count, seed);
  return g;
}

struct GraphSource {
  const ExperimentSpec& spec;
  std::optional<Graph> loaded;  // files source, split not yet applied when none given

  explicit GraphSource(const ExperimentSpec& s) : spec(s) {
    if (s.data.source != "files") return;
    GraphFiles files{s.data.edges, s.data.features, s.data.labels, std::nullopt};
    if (!s.data.split.empty()) files.split = s.data.split;
    loaded = load_graph(files);
  }

  Graph for_seed(std::uint64_t seed, ShiftPoint probs) const {
    if (!loaded) return sbm_graph(spec, seed, probs);
    Graph g = *loaded;
    if (spec.data.split.empty()) g.split = split_nodes(g, spec.data.train_per_class, spec.data.val_count, seed);
    return g;
  }
};

// ---- runs -----------------------------------------------------------------

struct Method {
  std::string name;
  CitConfig config;
};

struct RunOutput {
  std::vector<double> accuracy;  // one per x
  std::optional<EvalMetrics> test;
  double silhouette = NAN;
  double wall_seconds = 0.0;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

// Runs fn(i) for i in [0, n) on `threads` workers. Results land in per-index
// slots, so output order does not depend on scheduling.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < std::min(threads, n); ++t) {
    workers.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (failure) return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

std::string percent_cell(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return fmt("%.2f", 100.0 * mean) + "±" + fmt("%.2f", 100.0 * sd);
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

// Summary rows comparing the first series (baseline) against the second.
std::string comparison_summary(const std::vector<CurveSeries>& curves) {
  std::ostringstream out;
  out << "condition";
  for (const auto& c : curves) out << ',' << c.method << "_mean," << c.method << "_std";
  for (const auto& c : curves) out << ',' << c.method;
  const bool paired = curves.size() == 2;
  if (paired) out << ",t,df,significance";
  out << '\n';
  for (std::size_t i = 0; i < curves.front().xs.size(); ++i) {
    out << curves.front().xs[i];
    for (const auto& c : curves) {
      const auto [m, sd] = mean_std(c.values[i]);
      out << ',' << fmt("%.6f", m) << ',' << fmt("%.6f", sd);
    }
    for (const auto& c : curves) out << ',' << percent_cell(c.values[i]);
    if (paired) {
      const auto& base = curves[0].values[i];
      const auto& cit = curves[1].values[i];
      std::string t = "nan", sig;
      const std::string df = std::to_string(base.size() - 1);
      if (base.size() >= 2) {
        try {
          const TTestResult r = paired_t_test(cit, base);
          t = fmt("%.4f", r.t_statistic);
          sig = r.significant_01 ? "**" : r.significant_05 ? "*" : "";
        } catch (const NumericalError&) {
          // Identical paired differences: no spread to test against.
        }
      }
      out << ',' << t << ',' << df << ',' << sig;
    }
    out << '\n';
  }
  return out.str();
}

std::string long_curve(const std::vector<CurveSeries>& curves, const std::vector<std::uint64_t>& seeds) {
  std::ostringstream out;
  out << "x,method,seed,value\n";
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.xs.size(); ++i)
      for (std::size_t s = 0; s < c.values[i].size(); ++s)
        out << c.xs[i] << ',' << c.method << ',' << seeds[s] << ',' << g17(c.values[i][s]) << '\n';
  return out.str();
}

std::string shift_label(const ShiftPoint& p) { return fmt("%g", p.p_inter) + "/" + fmt("%g", p.p_intra); }

std::string sweep_label(const std::string& param, double v) { return param + "=" + fmt("%g", v); }

CitConfig sweep_config(const CitConfig& base, const std::string& param, double v) {
  CitConfig c = base;
  if (param == "m") c.m = static_cast<std::size_t>(v);
  else if (param == "p") c.p = v;
  else c.k_period = static_cast<std::size_t>(v);
  return c;
}

class Runner {
 public:
  Runner(const ExperimentSpec& spec, fs::path out) : spec_(spec), out_(std::move(out)) {}

  ExperimentResult run() {
    fs::create_directories(out_ / "records");
    fs::create_directories(out_ / "curves");
    emit("resolved-config.txt", resolved_config(spec_));
    if (spec_.kind == ExperimentKind::TheoryCheck) return run_theory();

    const GraphSource source(spec_);
    const auto methods = make_methods();
    const std::size_t seeds = spec_.seeds.size();
    std::vector<RunOutput> outputs(methods.size() * seeds);
    std::mutex file_mu;

    parallel_for(outputs.size(), spec_.threads, [&](std::size_t task) {
      const Method& method = methods[task / seeds];
      const std::uint64_t seed = spec_.seeds[task % seeds];
      CitConfig config = method.config;
      config.seed = seed;
      RunOutput& out = outputs[task];
      const ShiftPoint train_probs = spec_.kind == ExperimentKind::SbmShift
                                         ? spec_.shift.front()
                                         : ShiftPoint{spec_.data.sbm.p_inter, spec_.data.sbm.p_intra};
      const Graph g = source.for_seed(seed, train_probs);
      const TrainResult trained = train(g, config);
      out.test = trained.record.test;
      out.wall_seconds = trained.record.wall_seconds;
      evaluate_run(trained, g, seed, out);

      std::ostringstream rec;
      nlohmann::ordered_json header;
      header["method"] = method.name;
      header["seed"] = seed;
      header["resolved_config"] = resolved_config(spec_);
      rec << header.dump() << '\n';
      write_run_record(rec, trained.record);
      std::lock_guard<std::mutex> lock(file_mu);
      emit("records/" + method.name + "-seed" + std::to_string(seed) + ".ndjson", rec.str());
    });

    return assemble(methods, outputs);
  }

 private:
  std::vector<Method> make_methods() const {
    std::vector<Method> methods;
    if (spec_.kind == ExperimentKind::Sweep) {
      for (double v : spec_.sweep.values)
        methods.push_back({"cit-" + sweep_label(spec_.sweep.param, v), sweep_config(spec_.cit, spec_.sweep.param, v)});
      return methods;
    }
    if (spec_.baseline) methods.push_back({"gcn", spec_.cit.baseline()});
    methods.push_back({"cit", spec_.cit});
    return methods;
  }

  std::vector<std::string> xs() const {
    std::vector<std::string> out;
    switch (spec_.kind) {
      case ExperimentKind::SbmShift:
        for (const auto& p : spec_.shift) out.push_back(shift_label(p));
        break;
      case ExperimentKind::Perturb:
        out.push_back("clean");
        for (const auto& s : spec_.perturb) out.push_back(s.op + "-" + fmt("%g", s.ratio));
        break;
      default:
        out.push_back("test");
    }
    return out;
  }

  void evaluate_run(const TrainResult& trained, const Graph& g, std::uint64_t seed, RunOutput& out) const {
    switch (spec_.kind) {
      case ExperimentKind::SbmShift: {
        const auto& sizes = spec_.data.sbm.block_sizes;
        for (std::size_t i = 0; i < spec_.shift.size(); ++i) {
          const auto& p = spec_.shift[i];
          const Graph shifted = with_adjacency(
              g, sbm_edges(sizes, block_probs(sizes.size(), p.p_inter, p.p_intra),
                           derive_seed(seed, "shift-edges", i)));
          out.accuracy.push_back(evaluate(trained.gcn, shifted, g.split.test).accuracy);
        }
        break;
      }
      case ExperimentKind::Perturb: {
        out.accuracy.push_back(evaluate(trained.gcn, g, g.split.test).accuracy);
        for (std::size_t i = 0; i < spec_.perturb.size(); ++i) {
          const auto& step = spec_.perturb[i];
          const std::uint64_t ps = derive_seed(seed, "perturb", i);
          const Graph changed = step.op == "add" ? perturb_add_edges(g, step.ratio, ps)
                                                 : perturb_delete_edges(g, step.ratio, ps);
          out.accuracy.push_back(evaluate(trained.gcn, changed, g.split.test).accuracy);
        }
        break;
      }
      case ExperimentKind::Sweep: {
        out.accuracy.push_back(evaluate(trained.gcn, g, g.split.test).accuracy);
        const auto clusters = cluster_assignments(trained.gcn, trained.head, g);
        const bool several = std::adjacent_find(clusters.begin(), clusters.end(), std::not_equal_to<>()) != clusters.end();
        if (several) out.silhouette = silhouette(embed(trained.gcn, g), clusters);
        break;
      }
      default:
        out.accuracy.push_back(evaluate(trained.gcn, g, g.split.test).accuracy);
    }
  }

  ExperimentResult assemble(const std::vector<Method>& methods, const std::vector<RunOutput>& outputs) {
    const std::size_t seeds = spec_.seeds.size();
    const auto labels = xs();
    ExperimentResult result;

    std::ostringstream timing;
    timing << "method,seed,wall_seconds\n";
    for (std::size_t m = 0; m < methods.size(); ++m)
      for (std::size_t s = 0; s < seeds; ++s)
        timing << methods[m].name << ',' << spec_.seeds[s] << ',' << fmt("%.3f", outputs[m * seeds + s].wall_seconds) << '\n';

    if (spec_.kind == ExperimentKind::Sweep) {
      CurveSeries acc{"accuracy", {}, {}}, sil{"silhouette", {}, {}};
      for (std::size_t m = 0; m < methods.size(); ++m) {
        const std::string x = sweep_label(spec_.sweep.param, spec_.sweep.values[m]);
        acc.xs.push_back(x);
        sil.xs.push_back(x);
        acc.values.emplace_back();
        sil.values.emplace_back();
        for (std::size_t s = 0; s < seeds; ++s) {
          acc.values.back().push_back(outputs[m * seeds + s].accuracy.front());
          sil.values.back().push_back(outputs[m * seeds + s].silhouette);
        }
      }
      std::ostringstream summary;
      summary << spec_.sweep.param << ",accuracy_mean,accuracy_std,silhouette_mean,silhouette_std,accuracy\n";
      for (std::size_t m = 0; m < methods.size(); ++m) {
        const auto [am, as] = mean_std(acc.values[m]);
        const auto [sm, ss] = mean_std(sil.values[m]);
        summary << fmt("%g", spec_.sweep.values[m]) << ',' << fmt("%.6f", am) << ',' << fmt("%.6f", as) << ','
                << fmt("%.6f", sm) << ',' << fmt("%.6f", ss) << ',' << percent_cell(acc.values[m]) << '\n';
      }
      result.summary_csv = summary.str();
      const CurveSeries a1[] = {acc};
      const CurveSeries s1[] = {sil};
      emit("curves/accuracy.csv", emit_plot_data(a1, spec_.sweep.param));
      emit("curves/silhouette.csv", emit_plot_data(s1, spec_.sweep.param));
      result.curves = {acc, sil};
    } else {
      for (std::size_t m = 0; m < methods.size(); ++m) {
        CurveSeries c{methods[m].name, labels, std::vector<std::vector<double>>(labels.size())};
        for (std::size_t s = 0; s < seeds; ++s)
          for (std::size_t i = 0; i < labels.size(); ++i) c.values[i].push_back(outputs[m * seeds + s].accuracy[i]);
        result.curves.push_back(std::move(c));
      }
      if (spec_.kind == ExperimentKind::SingleTrain) append_test_metrics(methods, outputs, result.curves);
      result.summary_csv = comparison_summary(result.curves);
      emit("curves/accuracy.csv", emit_plot_data(std::span(result.curves.data(), result.curves.size()),
                                                  spec_.kind == ExperimentKind::SbmShift ? "inter/intra" : "condition"));
    }
    emit("curves/accuracy_by_seed.csv", long_curve(result.curves, spec_.seeds));
    emit("summary.csv", result.summary_csv);
    emit("timing.csv", timing.str());
    result.files = files_;
    return result;
  }

  // single_train also reports macro-F1 (and ROC-AUC for binary tasks) rows.
  void append_test_metrics(const std::vector<Method>& methods, const std::vector<RunOutput>& outputs,
                           std::vector<CurveSeries>& curves) const {
    const std::size_t seeds = spec_.seeds.size();
    bool have_auc = true;
    for (const auto& o : outputs) have_auc = have_auc && o.test && o.test->roc_auc;
    for (std::size_t m = 0; m < methods.size(); ++m) {
      curves[m].xs.push_back("macro_f1");
      curves[m].values.emplace_back();
      if (have_auc) {
        curves[m].xs.push_back("roc_auc");
        curves[m].values.emplace_back();
      }
      for (std::size_t s = 0; s < seeds; ++s) {
        const auto& test = outputs[m * seeds + s].test;
        curves[m].values[1].push_back(test ? test->macro_f1 : NAN);
        if (have_auc) curves[m].values[2].push_back(*test->roc_auc);
      }
    }
  }

  ExperimentResult run_theory() {
    const TheorySpec& t = spec_.theory;
    std::ostringstream summary;
    summary << "world,dim,p,pi_0gD_post,skew_gap,d_dependence,var_pre,var_post,var_post_mixture,"
               "var_empirical,cov_pre,cov_post,cov_empirical,cov_p1_claim\n";
    std::vector<std::string> labels;
    for (double p : t.p_grid) labels.push_back(fmt("%g", p));
    CurveSeries gap{"skew_gap", labels, std::vector<std::vector<double>>(labels.size())};
    CurveSeries dep{"d_dependence", labels, std::vector<std::vector<double>>(labels.size())};
    for (std::size_t w = 0; w < t.worlds; ++w) {
      const FisherWorld world = random_world(t.dims, derive_seed(t.seed, "theory-world", w));
      for (std::size_t i = 0; i < t.p_grid.size(); ++i) {
        const TransferReport r =
            theory_transfer_check(world, t.p_grid[i], {t.samples, derive_seed(t.seed, "theory-sim", w * 1000 + i)});
        gap.values[i].push_back(r.skew_gap);
        dep.values[i].push_back(r.d_dependence.front());
        for (std::size_t d = 0; d < t.dims; ++d) {
          auto cell = [](const std::vector<double>& v, std::size_t k) { return k < v.size() ? fmt("%.10g", v[k]) : std::string("nan"); };
          summary << w << ',' << d << ',' << fmt("%g", t.p_grid[i]) << ',' << fmt("%.10g", r.pi_0gD_post) << ','
                  << fmt("%.10g", r.skew_gap) << ',' << cell(r.d_dependence, d) << ',' << cell(r.pre.var, d) << ','
                  << cell(r.var_post, d) << ',' << cell(r.var_post_mixture, d) << ',' << cell(r.empirical_var, d)
                  << ',' << cell(r.pre.cov, d) << ',' << cell(r.cov_post, d) << ',' << cell(r.empirical_cov, d)
                  << ',' << cell(r.cov_p1_claim, d) << '\n';
        }
      }
    }
    ExperimentResult result;
    result.summary_csv = summary.str();
    result.curves = {gap, dep};
    emit("curves/theory.csv", emit_plot_data(std::span(result.curves.data(), result.curves.size()), "p"));
    emit("summary.csv", result.summary_csv);
    result.files = files_;
    return result;
  }

  void emit(const std::string& relative, const std::string& text) {
    write_file(out_ / relative, text);
    files_.push_back(out_ / relative);
  }

  const ExperimentSpec& spec_;
  fs::path out_;
  std::vector<fs::path> files_;
};

}  // namespace

std::string_view kind_name(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::SbmShift: return "sbm_shift";
    case ExperimentKind::Perturb: return "perturb";
    case ExperimentKind::SingleTrain: return "single_train";
    case ExperimentKind::TheoryCheck: return "theory_check";
    case ExperimentKind::Sweep: return "sweep";
  }
  return "unknown";
}

void ExperimentSpec::validate() const {
  if (seeds.empty()) throw ValidationError("seeds: need at least one seed");
  if (threads < 1) throw ValidationError("threads: must be >= 1");
  if (name.empty() || name.find_first_of("/\\") != std::string::npos)
    throw ValidationError("name: must be nonempty and contain no path separators");
  if (kind == ExperimentKind::TheoryCheck) {
    if (theory.p_grid.empty()) throw ValidationError("theory.p: need at least one value");
    for (double p : theory.p_grid)
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("theory.p: values must lie in [0, 1]");
    if (theory.worlds < 1) throw ValidationError("theory.worlds: must be >= 1");
    if (theory.dims < 1) throw ValidationError("theory.dims: must be >= 1");
    return;
  }
  cit.validate();
  if (data.source == "sbm") {
    const auto& s = data.sbm;
    if (s.block_sizes.size() < 2) throw ValidationError("data.sbm.block_sizes: need at least 2 blocks");
    for (double p : {s.p_inter, s.p_intra})
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("data.sbm.p_inter/p_intra: must lie in [0, 1]");
    if (s.feature_dim < 1) throw ValidationError("data.sbm.feature_dim: must be >= 1");
    if (!(s.class_std >= 0.0)) throw ValidationError("data.sbm.class_std: must be >= 0");
  } else if (data.source == "files") {
    if (data.edges.empty()) throw ValidationError("data.files.edges: required for the files source");
    if (data.features.empty()) throw ValidationError("data.files.features: required for the files source");
    if (data.labels.empty()) throw ValidationError("data.files.labels: required for the files source");
  } else {
    throw ValidationError("data.source: expected sbm or files, got '" + data.source + "'");
  }
  switch (kind) {
    case ExperimentKind::SbmShift:
      if (data.source != "sbm") throw ValidationError("data.source: sbm_shift needs the sbm source");
      if (shift.empty()) throw ValidationError("schedule.shift: need at least one inter:intra pair");
      for (const auto& p : shift)
        if (!(p.p_inter >= 0.0 && p.p_inter <= 1.0 && p.p_intra >= 0.0 && p.p_intra <= 1.0))
          throw ValidationError("schedule.shift: probabilities must lie in [0, 1]");
      break;
    case ExperimentKind::Perturb:
      if (perturb.empty()) throw ValidationError("schedule.perturb: need at least one op:ratio step");
      for (const auto& s : perturb) {
        if (s.op != "add" && s.op != "delete")
          throw ValidationError("schedule.perturb: op must be add or delete, got '" + s.op + "'");
        if (!(s.ratio >= 0.0) || (s.op == "delete" && s.ratio > 1.0))
          throw ValidationError("schedule.perturb: ratio out of range for " + s.op);
      }
      break;
    case ExperimentKind::Sweep:
      if (sweep.param != "m" && sweep.param != "p" && sweep.param != "k_period")
        throw ValidationError("sweep.param: expected m, p or k_period, got '" + sweep.param + "'");
      if (sweep.values.empty()) throw ValidationError("sweep.values: need at least one value");
      for (double v : sweep.values) sweep_config(cit, sweep.param, v).validate();
      for (double v : sweep.values)
        if (sweep.param != "p" && v != std::floor(v)) throw ValidationError("sweep.values: " + sweep.param + " needs integers");
      break;
    default:
      break;
  }
}

std::vector<ShiftPoint> linear_schedule(ShiftPoint from, ShiftPoint to, std::size_t steps) {
  if (steps < 2) throw ValidationError("linear_schedule: need at least 2 steps");
  std::vector<ShiftPoint> out;
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    out.push_back({from.p_inter + (to.p_inter - from.p_inter) * t, from.p_intra + (to.p_intra - from.p_intra) * t});
  }
  out.back() = to;
  return out;
}

ExperimentSpec sbm_shift_preset() {
  ExperimentSpec s;
  s.kind = ExperimentKind::SbmShift;
  s.name = "sbm-shift";
  s.seeds = {0, 1, 2, 3, 4};
  s.shift = linear_schedule({0.005, 0.0005}, {0.0025, 0.003}, 6);
  return s;
}

ExperimentSpec parse_spec(std::string_view text, const std::string& source) {
  std::map<std::string, Entry> entries;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (!header) {
      if (line != kHeader) throw ParseError(source, lineno, "expected header '" + std::string(kHeader) + "'");
      header = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ParseError(source, lineno, "missing key before '='");
    if (entries.count(key)) throw ParseError(source, lineno, "duplicate key '" + key + "'");
    entries[key] = {trim(std::string_view(line).substr(eq + 1)), lineno};
  }
  if (!header) throw ParseError(source, lineno, "empty spec (missing '" + std::string(kHeader) + "' header)");

  ExperimentSpec spec;
  Reader reader{entries};
  visit_fields(spec, reader);
  for (const auto& [key, entry] : entries)
    if (!entry.used) throw ValidationError(key + " (line " + std::to_string(entry.line) + "): unknown key");
  spec.validate();
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open spec file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_spec(text.str(), path.string());
}

std::string resolved_config(const ExperimentSpec& spec) {
  Writer w;
  visit_fields(spec, w);
  return std::string(kHeader) + "\n" + w.out;
}

std::string emit_plot_data(std::span<const CurveSeries> series, std::string_view x_name) {
  if (series.empty()) throw ValidationError("emit_plot_data: no series");
  for (const auto& s : series)
    if (s.xs.size() != s.values.size())
      throw ValidationError("emit_plot_data: series " + s.method + " has mismatched x and value lists");
  std::vector<std::string> shared;
  for (const auto& x : series.front().xs) {
    bool everywhere = true;
    for (const auto& s : series.subspan(1)) everywhere = everywhere && std::find(s.xs.begin(), s.xs.end(), x) != s.xs.end();
    if (everywhere) shared.push_back(x);
  }
  if (shared.empty()) throw ValidationError("emit_plot_data: the series share no x values");

  std::ostringstream out;
  out << x_name;
  for (const auto& s : series) out << ',' << s.method << "_mean," << s.method << "_std";
  out << '\n';
  for (const auto& x : shared) {
    out << x;
    for (const auto& s : series) {
      const auto idx = static_cast<std::size_t>(std::find(s.xs.begin(), s.xs.end(), x) - s.xs.begin());
      if (s.values[idx].empty()) throw ValidationError("emit_plot_data: series " + s.method + " has no values at " + x);
      const auto [m, sd] = mean_std(s.values[idx]);
      out << ',' << g17(m) << ',' << g17(sd);
    }
    out << '\n';
  }
  return out.str();
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  return Runner(spec, out_dir).run();
}

ExperimentResult run_experiment(const std::filesystem::path& spec_file, const std::filesystem::path& out_dir) {
  return run_experiment(load_spec(spec_file), out_dir);
}

}  // namespace cit
