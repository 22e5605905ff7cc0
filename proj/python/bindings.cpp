// Python bindings for the CIT workbench core.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cit/autodiff.hpp"
#include "cit/cithead.hpp"
#include "cit/errors.hpp"
#include "cit/experiment.hpp"
#include "cit/gradsuite.hpp"
#include "cit/graph.hpp"
#include "cit/metrics.hpp"
#include "cit/theory.hpp"
#include "cit/trainer.hpp"
#include "cit/version.hpp"

namespace py = pybind11;
using namespace cit;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Edges = std::vector<std::pair<std::size_t, std::size_t>>;

DenseMatrix to_matrix(const Array& a) {
  // 1-D input is one value per row.
  if (a.ndim() == 1) return DenseMatrix(a.shape(0), 1, std::vector<double>(a.data(), a.data() + a.size()));
  if (a.ndim() != 2) throw ShapeError("expected a 1-D or 2-D array, got " + std::to_string(a.ndim()) + "-D");
  return DenseMatrix(a.shape(0), a.shape(1), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const DenseMatrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

py::dict epoch_dict(const EpochLog& e) {
  py::dict d;
  d["epoch"] = e.epoch;
  d["total"] = e.total;
  d["loss_f"] = e.loss_f;
  d["loss_c"] = e.loss_c;
  d["loss_o"] = e.loss_o;
  d["train_accuracy"] = e.train_accuracy;
  d["val_accuracy"] = e.val_accuracy;
  d["transferred"] = e.transferred;
  return d;
}

py::object metrics_dict(const std::optional<EvalMetrics>& m) {
  if (!m) return py::none();
  py::dict d;
  d["accuracy"] = m->accuracy;
  d["macro_f1"] = m->macro_f1;
  d["roc_auc"] = m->roc_auc ? py::cast(*m->roc_auc) : py::none();
  return d;
}

Graph make_sbm(const std::vector<std::size_t>& block_sizes, double p_same, double p_cross, std::size_t feature_dim,
               double separation, double class_std, std::uint64_t seed) {
  SbmSpec spec;
  spec.block_sizes = block_sizes;
  spec.edge_prob.assign(block_sizes.size(), std::vector<double>(block_sizes.size(), p_cross));
  for (std::size_t b = 0; b < block_sizes.size(); ++b) spec.edge_prob[b][b] = p_same;
  spec.feature_dim = feature_dim;
  spec.class_means = make_class_means(block_sizes.size(), feature_dim, separation, seed);
  spec.class_std = class_std;
  spec.seed = seed;
  return sbm_generate(spec);
}

Mask to_mask(const std::vector<bool>& v) { return Mask(v.begin(), v.end()); }

}  // namespace

PYBIND11_MODULE(_cit, m) {
  m.doc() = "Cluster-information transfer for GCNs under structure shift";
  m.attr("__version__") = std::string(kVersion);

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<NumericalError>(m, "NumericalError", base);
  auto validation = py::register_exception<ValidationError>(m, "ValidationError", base);
  py::register_exception<ParseError>(m, "ParseError", validation);

  // ---- graphs ----
  py::class_<Graph>(m, "Graph")
      .def_property_readonly("num_nodes", &Graph::num_nodes)
      .def_property_readonly("num_edges", &Graph::num_edges)
      .def_property_readonly("num_classes", [](const Graph& g) { return g.num_classes; })
      .def_property_readonly("features", [](const Graph& g) { return to_array(g.features); })
      .def_property_readonly("labels", [](const Graph& g) { return g.labels; })
      .def("edges", [](const Graph& g) { return edge_list(g.adjacency); }, "Undirected edges as (i, j) with i < j.")
      .def_property(
          "train_mask", [](const Graph& g) { return std::vector<bool>(g.split.train.begin(), g.split.train.end()); },
          [](Graph& g, const std::vector<bool>& v) { g.split.train = to_mask(v); })
      .def_property(
          "val_mask", [](const Graph& g) { return std::vector<bool>(g.split.val.begin(), g.split.val.end()); },
          [](Graph& g, const std::vector<bool>& v) { g.split.val = to_mask(v); })
      .def_property(
          "test_mask", [](const Graph& g) { return std::vector<bool>(g.split.test.begin(), g.split.test.end()); },
          [](Graph& g, const std::vector<bool>& v) { g.split.test = to_mask(v); })
      .def("validate", &Graph::validate);

  m.def(
      "graph_from_arrays",
      [](std::size_t n, const Edges& edges, const Array& features, const std::vector<int>& labels) {
        Graph g;
        g.adjacency = adjacency_from_edges(n, edges);
        g.features = to_matrix(features);
        g.labels = labels;
        int top = -1;
        for (int y : labels) top = std::max(top, y);
        g.num_classes = top + 1;
        g.validate();
        return g;
      },
      py::arg("num_nodes"), py::arg("edges"), py::arg("features"), py::arg("labels"));
  m.def("sbm_graph", &make_sbm, py::arg("block_sizes"), py::arg("p_same"), py::arg("p_cross"),
        py::arg("feature_dim"), py::arg("separation") = 1.0, py::arg("class_std") = 1.0, py::arg("seed") = 0,
        "Stochastic block model graph with Gaussian class features; labels are block ids.");
  m.def(
      "split_nodes",
      [](Graph g, std::size_t train_per_class, std::size_t val_count, std::uint64_t seed) {
        g.split = split_nodes(g, train_per_class, val_count, seed);
        return g;
      },
      py::arg("graph"), py::arg("train_per_class"), py::arg("val_count") = 0, py::arg("seed") = 0,
      "Copy of the graph with a fresh train/val/test split.");
  m.def("perturb_add_edges", &perturb_add_edges, py::arg("graph"), py::arg("ratio"), py::arg("seed") = 0);
  m.def("perturb_delete_edges", &perturb_delete_edges, py::arg("graph"), py::arg("ratio"), py::arg("seed") = 0);
  m.def(
      "load_graph",
      [](const std::filesystem::path& edges, const std::filesystem::path& features, const std::filesystem::path& labels,
         std::optional<std::filesystem::path> split) { return load_graph({edges, features, labels, split}); },
      py::arg("edges"), py::arg("features"), py::arg("labels"), py::arg("split") = py::none());

  // ---- clustering head and transfer ----
  m.def(
      "mincut_loss",
      [](const Array& s, std::size_t n, const Edges& edges) {
        ad::Tape t;
        return mincut_loss(t.leaf(to_matrix(s)), normalize_adjacency(adjacency_from_edges(n, edges))).payload()(0, 0);
      },
      py::arg("s"), py::arg("num_nodes"), py::arg("edges"));
  m.def(
      "ortho_loss",
      [](const Array& s) {
        ad::Tape t;
        return ortho_loss(t.leaf(to_matrix(s))).payload()(0, 0);
      },
      py::arg("s"));
  m.def(
      "cluster_stats",
      [](const Array& s, const Array& z) {
        ad::Tape t;
        const ClusterState st = cluster_stats(t.leaf(to_matrix(s)), t.leaf(to_matrix(z)));
        py::dict d;
        d["centers"] = to_array(st.centers.payload());
        d["stds"] = to_array(st.stds.payload());
        d["masses"] = st.masses;
        d["empty"] = st.empty;
        return d;
      },
      py::arg("s"), py::arg("z"), "Soft cluster centers and spreads of embeddings z under assignment s.");
  m.def(
      "transfer",
      [](const Array& z, const Array& s, const std::vector<std::size_t>& nodes,
         const std::vector<std::size_t>& targets) {
        ad::Tape t;
        const auto zv = t.leaf(to_matrix(z));
        const ClusterState st = cluster_stats(t.leaf(to_matrix(s)), zv);
        return to_array(transfer_nodes(zv, st, {nodes, targets}).payload());
      },
      py::arg("z"), py::arg("s"), py::arg("nodes"), py::arg("targets"),
      "Move each listed node to its target cluster's statistics, noise off.");

  // ---- training ----
  py::class_<CitConfig>(m, "CitConfig")
      .def(py::init<>())
      .def_readwrite("m", &CitConfig::m)
      .def_readwrite("p", &CitConfig::p)
      .def_readwrite("k_period", &CitConfig::k_period)
      .def_readwrite("alpha_f", &CitConfig::alpha_f)
      .def_readwrite("alpha_c", &CitConfig::alpha_c)
      .def_readwrite("alpha_o", &CitConfig::alpha_o)
      .def_readwrite("noise", &CitConfig::noise)
      .def_readwrite("lr", &CitConfig::lr)
      .def_readwrite("weight_decay", &CitConfig::weight_decay)
      .def_readwrite("dropout", &CitConfig::dropout)
      .def_readwrite("epochs", &CitConfig::epochs)
      .def_readwrite("patience", &CitConfig::patience)
      .def_readwrite("seed", &CitConfig::seed)
      .def_readwrite("hidden_dim", &CitConfig::hidden_dim)
      .def_readwrite("layers", &CitConfig::layers)
      .def_readwrite("enabled", &CitConfig::enabled)
      .def("validate", &CitConfig::validate)
      .def("baseline", &CitConfig::baseline);

  py::class_<TrainResult>(m, "TrainResult")
      .def_property_readonly("epochs",
                             [](const TrainResult& r) {
                               py::list out;
                               for (const auto& e : r.record.epochs) out.append(epoch_dict(e));
                               return out;
                             })
      .def_property_readonly("best_epoch", [](const TrainResult& r) { return r.record.best_epoch; })
      .def_property_readonly("test", [](const TrainResult& r) { return metrics_dict(r.record.test); })
      .def("record_ndjson",
           [](const TrainResult& r) {
             std::ostringstream out;
             write_run_record(out, r.record);
             return out.str();
           })
      .def("predict_logits", [](const TrainResult& r, const Graph& g) { return to_array(predict_logits(r.gcn, g)); })
      .def("embed", [](const TrainResult& r, const Graph& g) { return to_array(embed(r.gcn, g)); })
      .def("clusters", [](const TrainResult& r, const Graph& g) { return cluster_assignments(r.gcn, r.head, g); })
      .def(
          "evaluate",
          [](const TrainResult& r, const Graph& g, std::optional<std::vector<bool>> mask) {
            return metrics_dict(evaluate(r.gcn, g, mask ? to_mask(*mask) : g.split.test));
          },
          py::arg("graph"), py::arg("mask") = py::none());

  m.def("train", &train, py::arg("graph"), py::arg("config"), py::call_guard<py::gil_scoped_release>());

  // ---- metrics ----
  m.def(
      "accuracy", [](const std::vector<int>& p, const std::vector<int>& y) { return accuracy(p, y); },
      py::arg("predictions"), py::arg("labels"));
  m.def(
      "macro_f1", [](const std::vector<int>& p, const std::vector<int>& y, int c) { return macro_f1(p, y, c); },
      py::arg("predictions"), py::arg("labels"), py::arg("num_classes"));
  m.def(
      "roc_auc", [](const std::vector<double>& s, const std::vector<int>& y) { return roc_auc(s, y); },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "silhouette", [](const Array& x, const std::vector<int>& a) { return silhouette(to_matrix(x), a); },
      py::arg("points"), py::arg("assignments"));
  m.def(
      "paired_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const TTestResult r = paired_t_test(a, b);
        py::dict d;
        d["t"] = r.t_statistic;
        d["df"] = r.degrees_of_freedom;
        d["mean_difference"] = r.mean_difference;
        d["significant_05"] = r.significant_05;
        d["significant_01"] = r.significant_01;
        return d;
      },
      py::arg("a"), py::arg("b"));
  m.def("t_critical", &t_critical, py::arg("alpha"), py::arg("df"));

  // ---- theory ----
  py::class_<FisherWorld>(m, "FisherWorld")
      .def_readonly("mu_D", &FisherWorld::mu_D)
      .def_readonly("mu_R", &FisherWorld::mu_R)
      .def_readonly("sigma_D", &FisherWorld::sigma_D)
      .def_readonly("sigma_R", &FisherWorld::sigma_R)
      .def_readonly("pi_D", &FisherWorld::pi_D)
      .def_readonly("pi_0gD", &FisherWorld::pi_0gD)
      .def_readonly("pi_0gR", &FisherWorld::pi_0gR)
      .def_property_readonly("pi_0", &FisherWorld::pi_0)
      .def_property_readonly("pi_1", &FisherWorld::pi_1);
  m.def("random_world", &random_world, py::arg("dims"), py::arg("seed"));
  m.def("consistent_world", &consistent_world, py::arg("n_D0"), py::arg("n_D1"), py::arg("n_R0"), py::arg("n_R1"),
        py::arg("mu_D"), py::arg("within_D"), py::arg("within_R"));
  m.def(
      "fisher_stats",
      [](const FisherWorld& w) {
        const FisherStats s = fisher_stats(w);
        py::dict d;
        d["var"] = s.var;
        d["cov"] = s.cov;
        return d;
      },
      py::arg("world"));
  m.def(
      "theory_transfer_check",
      [](const FisherWorld& w, double p, std::size_t samples, std::uint64_t seed) {
        const TransferReport r = theory_transfer_check(w, p, {samples, seed});
        py::dict d;
        d["p"] = r.p;
        d["var_pre"] = r.pre.var;
        d["cov_pre"] = r.pre.cov;
        d["var_post"] = r.var_post;
        d["var_post_mixture"] = r.var_post_mixture;
        d["cov_post"] = r.cov_post;
        d["cov_p1_claim"] = r.cov_p1_claim;
        d["pi_D_post"] = r.pi_D_post;
        d["pi_0gD_post"] = r.pi_0gD_post;
        d["skew_gap"] = r.skew_gap;
        d["d_dependence"] = r.d_dependence;
        d["empirical_var"] = r.empirical_var;
        d["empirical_cov"] = r.empirical_cov;
        d["p1_claim_holds"] = r.p1_claim_holds;
        return d;
      },
      py::arg("world"), py::arg("p"), py::arg("samples") = 0, py::arg("seed") = 0);

  // ---- experiments ----
  m.def("preset_config", [] { return resolved_config(sbm_shift_preset()); },
        "Resolved spec text of the structure-shift preset.");
  m.def("resolve_spec", [](const std::string& text) { return resolved_config(parse_spec(text)); }, py::arg("text"),
        "Parse and validate spec text; return it with every default filled in.");
  m.def(
      "run_experiment",
      [](const std::string& spec_text, const std::filesystem::path& out_dir) {
        const ExperimentSpec spec = parse_spec(spec_text);
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(spec, out_dir);
        }
        py::dict d;
        d["summary_csv"] = r.summary_csv;
        std::vector<std::string> files;
        for (const auto& f : r.files) files.push_back(f.string());
        d["files"] = files;
        return d;
      },
      py::arg("spec_text"), py::arg("out_dir"));
  m.def(
      "gradient_suite",
      [](std::uint64_t seed) {
        py::list out;
        for (const auto& e : run_gradient_suite(seed)) {
          py::dict d;
          d["name"] = e.name;
          d["tolerance"] = e.tolerance;
          d["max_rel_error"] = e.report.max_rel_error;
          d["passed"] = e.report.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 0);
}
