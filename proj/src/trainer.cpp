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

#include "cit/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include <json.hpp>

#include "cit/errors.hpp"
#include "cit/metrics.hpp"
#include "cit/rng.hpp"

namespace cit {
namespace {

using ad::Value;

struct Forward {
  Value z;       // encoder output
  Value logits;  // classifier on z (no transfer)
};

Forward inference(const GcnParams& params, const NormalizedAdjacency& adj, const Graph& g,
                  ad::Tape& tape) {
  const GcnBinding b = bind(tape, params);
  const Value z = gcn_forward(adj, tape.constant(g.features), b);
  return {z, classify(z, b)};
}

std::vector<int> argmax_rows(const DenseMatrix& m) {
  std::vector<int> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double accuracy_on(const std::vector<int>& predictions, const Graph& g,
                   const std::vector<std::size_t>& rows) {
  std::size_t hits = 0;
  for (std::size_t r : rows) hits += predictions[r] == g.labels[r];
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

EvalMetrics metrics_from_logits(const DenseMatrix& logits, const Graph& g, const Mask& mask) {
  const auto rows = mask_indices(mask);
  if (rows.empty()) throw ValidationError("evaluate: empty mask");
  const auto all = argmax_rows(logits);
  std::vector<int> pred, truth;
  for (std::size_t r : rows) {
    pred.push_back(all[r]);
    truth.push_back(g.labels[r]);
  }
  EvalMetrics m;
  m.accuracy = accuracy(pred, truth);
  m.macro_f1 = macro_f1(pred, truth, g.num_classes);
  if (g.num_classes == 2) {
    const bool both = std::count(truth.begin(), truth.end(), 1) > 0 &&
                      std::count(truth.begin(), truth.end(), 0) > 0;
    if (both) {
      std::vector<double> scores;
      for (std::size_t r : rows) {
        const double a = logits(r, 0), b = logits(r, 1);
        scores.push_back(1.0 / (1.0 + std::exp(a - b)));  // softmax probability of class 1
      }
      m.roc_auc = roc_auc(scores, truth);
    }
  }
  return m;
}

// Parameters flattened in the order the optimizer sees them.
std::vector<DenseMatrix> flatten(const GcnParams& gcn, const ClusterHeadParams& head) {
  std::vector<DenseMatrix> out(gcn.layer_weights.begin(), gcn.layer_weights.end());
  out.push_back(gcn.classifier_weight);
  out.push_back(gcn.classifier_bias);
  out.push_back(head.mlp_weight);
  out.push_back(head.mlp_bias);
  return out;
}

void unflatten(const std::vector<DenseMatrix>& flat, GcnParams& gcn, ClusterHeadParams& head) {
  const std::size_t layers = gcn.layer_weights.size();
  for (std::size_t l = 0; l < layers; ++l) gcn.layer_weights[l] = flat[l];
  gcn.classifier_weight = flat[layers];
  gcn.classifier_bias = flat[layers + 1];
  head.mlp_weight = flat[layers + 2];
  head.mlp_bias = flat[layers + 3];
}

nlohmann::json number_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

}  // namespace

void CitConfig::validate() const {
  if (m < 2) throw ValidationError("cit.m: need at least 2 clusters");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("cit.p: must lie in [0, 1]");
  if (k_period < 1) throw ValidationError("cit.k_period: must be >= 1");
  if (!(alpha_f > 0.0)) throw ValidationError("cit.alpha_f: must be positive");
  if (!(alpha_c >= 0.0)) throw ValidationError("cit.alpha_c: must be >= 0");
  if (!(alpha_o >= 0.0)) throw ValidationError("cit.alpha_o: must be >= 0");
  if (!(lr > 0.0)) throw ValidationError("cit.lr: must be positive");
  if (!(weight_decay >= 0.0)) throw ValidationError("cit.weight_decay: must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("cit.dropout: must lie in [0, 1)");
  if (epochs < 1) throw ValidationError("cit.epochs: must be >= 1");
  if (patience < 1) throw ValidationError("cit.patience: must be >= 1");
  if (hidden_dim < 1) throw ValidationError("cit.hidden_dim: must be >= 1");
  if (layers < 1) throw ValidationError("cit.layers: must be >= 1");
}

CitConfig CitConfig::baseline() const {
  CitConfig c = *this;
  c.enabled = false;
  return c;
}

void write_run_record(std::ostream& out, const RunRecord& record) {
  for (const auto& e : record.epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["total"] = e.total;
    j["loss_f"] = e.loss_f;
    j["loss_c"] = e.loss_c;
    j["loss_o"] = e.loss_o;
    j["train_accuracy"] = e.train_accuracy;
    j["val_accuracy"] = number_or_null(e.val_accuracy);
    j["transferred"] = e.transferred;
    out << j.dump() << '\n';
  }
  nlohmann::ordered_json s;
  s["summary"] = true;
  s["epochs_run"] = record.epochs_run;
  s["best_epoch"] = record.best_epoch;
  if (record.test) {
    s["test_accuracy"] = record.test->accuracy;
    s["test_macro_f1"] = record.test->macro_f1;
    if (record.test->roc_auc) s["test_roc_auc"] = *record.test->roc_auc;
  }
  out << s.dump() << '\n';
}

void adam_step(std::span<DenseMatrix> params, std::span<const DenseMatrix> grads, AdamState& state,
               double lr, double weight_decay) {
  if (params.size() != grads.size())
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params vs " +
                     std::to_string(grads.size()) + " gradients");
  if (state.first.empty()) {
    for (const auto& p : params) {
      state.first.emplace_back(p.rows(), p.cols());
      state.second.emplace_back(p.rows(), p.cols());
    }
  }
  if (state.first.size() != params.size())
    throw ShapeError("adam_step: optimizer state tracks a different parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].shape() || state.first[i].shape() != params[i].shape())
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " is " + params[i].shape().str() +
                       ", gradient " + grads[i].shape().str());
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double decay = 1.0 - lr * weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    auto m = state.first[i].data();
    auto v = state.second[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      p[j] = p[j] * decay - lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.eps);
    }
  }
}

TrainResult train(const Graph& g, const CitConfig& config) {
  config.validate();
  g.validate();
  const auto train_rows = mask_indices(g.split.train);
  if (train_rows.empty()) throw ValidationError("train: empty training mask");
  const auto val_rows = mask_indices(g.split.val);
  std::vector<std::size_t> train_labels;
  for (std::size_t r : train_rows) train_labels.push_back(static_cast<std::size_t>(g.labels[r]));

  const auto started = std::chrono::steady_clock::now();
  const NormalizedAdjacency adj = normalize_adjacency(g.adjacency);
  GcnParams gcn = init_gcn_params(g.feature_dim(), config.hidden_dim,
                                  static_cast<std::size_t>(g.num_classes), config.layers, config.seed);
  ClusterHeadParams head = init_cluster_head(config.hidden_dim, config.m, config.seed);
  std::vector<DenseMatrix> params = flatten(gcn, head);
  const std::size_t layers = config.layers;

  const double p = config.enabled ? config.p : 0.0;
  const double alpha_c = config.enabled ? config.alpha_c : 0.0;
  const double alpha_o = config.enabled ? config.alpha_o : 0.0;

  Rng dropout_rng = make_rng(config.seed, "dropout");
  AdamState adam;
  TrainResult result;
  RunRecord& record = result.record;
  std::vector<DenseMatrix> best = params;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  // Without a validation split the score is the epoch's training loss, which
  // was measured on the parameters before that epoch's step.
  const bool score_on_loss = val_rows.empty();
  std::vector<DenseMatrix> scored;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    try {
      ad::Tape tape;
      std::vector<Value> leaves;
      for (const auto& m : params) leaves.push_back(tape.leaf(m));
      GcnBinding gb;
      gb.layer_weights.assign(leaves.begin(), leaves.begin() + static_cast<std::ptrdiff_t>(layers));
      gb.classifier_weight = leaves[layers];
      gb.classifier_bias = leaves[layers + 1];
      const ClusterHeadBinding hb{leaves[layers + 2], leaves[layers + 3]};

      const Value z = gcn_forward(adj, tape.constant(g.features), gb, Dropout{config.dropout, &dropout_rng});
      const Value s = assign_clusters(z, hb);
      Value z_used = z;
      if (p > 0.0 && epoch % config.k_period == 0) {
        const ClusterState state =
            cluster_stats(s, z, {config.unnormalized_stats, config.literal_eq11});
        // A collapsed assignment leaves nowhere to move nodes; the epoch trains untransferred.
        if (state.nonempty() >= 2) {
          // Only training rows reach the classification loss, so only they are candidates.
          const TransferPlan plan = sample_transfer_plan(
              s.payload(), train_rows, p, derive_seed(config.seed, "transfer-plan", epoch));
          TransferOptions opts;
          opts.noise = config.noise;
          opts.scalar_noise = config.scalar_noise;
          opts.seed = derive_seed(config.seed, "transfer-eps", epoch);
          z_used = transfer_nodes(z, state, plan, opts);
          log.transferred = plan.nodes.size();
        }
      }
      const Value s_loss =
          config.cluster_loss_on_transferred && log.transferred > 0 ? assign_clusters(z_used, hb) : s;
      const Value lc = mincut_loss(s_loss, adj);
      const Value lo = ortho_loss(s_loss);
      const Value lf = ad::softmax_cross_entropy(classify(z_used, gb), train_rows, train_labels);

      Value total = ad::scale(lf, config.alpha_f);
      if (alpha_c > 0.0) total = ad::add(total, ad::scale(lc, alpha_c));
      if (alpha_o > 0.0) total = ad::add(total, ad::scale(lo, alpha_o));
      log.loss_f = lf.payload()(0, 0);
      log.loss_c = lc.payload()(0, 0);
      log.loss_o = lo.payload()(0, 0);
      log.total = total.payload()(0, 0);

      const ad::Gradients grads = tape.backward(total);
      std::vector<DenseMatrix> grad_list;
      for (const auto& leaf : leaves) grad_list.push_back(grads[leaf]);
      if (score_on_loss) scored = params;
      adam_step(params, grad_list, adam, config.lr, config.weight_decay);
      if (!score_on_loss) scored = params;

      unflatten(params, gcn, head);
      ad::Tape eval_tape;
      const auto predictions = argmax_rows(inference(gcn, adj, g, eval_tape).logits.payload());
      log.train_accuracy = accuracy_on(predictions, g, train_rows);
      log.val_accuracy = val_rows.empty() ? std::numeric_limits<double>::quiet_NaN()
                                          : accuracy_on(predictions, g, val_rows);
    } catch (const NumericalError& e) {
      throw NumericalError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    record.epochs.push_back(log);

    const double score = score_on_loss ? -log.total : log.val_accuracy;
    if (score > best_score) {
      best_score = score;
      best = scored;
      record.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  record.epochs_run = record.epochs.size();

  unflatten(best, gcn, head);
  if (!mask_indices(g.split.test).empty()) {
    ad::Tape tape;
    record.test = metrics_from_logits(inference(gcn, adj, g, tape).logits.payload(), g, g.split.test);
  }
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.gcn = std::move(gcn);
  result.head = std::move(head);
  return result;
}

DenseMatrix predict_logits(const GcnParams& params, const Graph& g) {
  ad::Tape tape;
  return inference(params, normalize_adjacency(g.adjacency), g, tape).logits.payload();
}

DenseMatrix embed(const GcnParams& params, const Graph& g) {
  ad::Tape tape;
  return inference(params, normalize_adjacency(g.adjacency), g, tape).z.payload();
}

std::vector<int> cluster_assignments(const GcnParams& params, const ClusterHeadParams& head,
                                     const Graph& g) {
  ad::Tape tape;
  const Value z = inference(params, normalize_adjacency(g.adjacency), g, tape).z;
  const auto hard = hard_assignments(assign_clusters(z, bind(tape, head)).payload());
  return {hard.begin(), hard.end()};
}

EvalMetrics evaluate(const GcnParams& params, const Graph& g, const Mask& mask) {
  if (mask.size() != g.num_nodes())
    throw ValidationError("evaluate: mask has " + std::to_string(mask.size()) + " entries for " +
                          std::to_string(g.num_nodes()) + " nodes");
  return metrics_from_logits(predict_logits(params, g), g, mask);
}

}  // namespace cit
