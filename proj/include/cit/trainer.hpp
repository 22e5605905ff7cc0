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

#ifndef CIT_TRAINER_HPP
#define CIT_TRAINER_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "cit/backbone.hpp"
#include "cit/cithead.hpp"
#include "cit/graph.hpp"

namespace cit {

struct CitConfig {
  std::size_t m = 4;         // clusters
  double p = 0.1;            // share of nodes transferred on a transfer epoch
  std::size_t k_period = 5;  // transfer on epochs k, 2k, ...
  double alpha_f = 0.5;
  double alpha_c = 0.3;
  double alpha_o = 0.2;
  bool noise = true;
  double lr = 0.01;
  double weight_decay = 5e-4;
  double dropout = 0.5;
  std::size_t epochs = 500;
  std::size_t patience = 100;
  std::uint64_t seed = 0;
  std::size_t hidden_dim = 64;
  std::size_t layers = 2;
  bool unnormalized_stats = false;
  bool literal_eq11 = false;
  bool cluster_loss_on_transferred = false;
  bool scalar_noise = false;
  // false: plain GCN. Equivalent to p = 0 with alpha_c = alpha_o = 0.
  bool enabled = true;

  void validate() const;
  /// Baseline counterpart: same backbone settings, mechanism off.
  CitConfig baseline() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double total = 0.0;
  double loss_f = 0.0;
  double loss_c = 0.0;
  double loss_o = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;  // NaN without a validation split
  std::size_t transferred = 0;
};

struct EvalMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> roc_auc;  // binary tasks only
};

struct RunRecord {
  std::vector<EpochLog> epochs;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  std::optional<EvalMetrics> test;  // absent with an empty test mask
  double wall_seconds = 0.0;        // not covered by the determinism guarantee
};

/// Per epoch, then a summary line; one JSON object per line.
void write_run_record(std::ostream& out, const RunRecord& record);

struct AdamState {
  std::vector<DenseMatrix> first;
  std::vector<DenseMatrix> second;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam step. Weight decay is decoupled: params are scaled
/// by (1 − lr·weight_decay) before the moment update is applied.
void adam_step(std::span<DenseMatrix> params, std::span<const DenseMatrix> grads, AdamState& state,
               double lr, double weight_decay);

struct TrainResult {
  GcnParams gcn;
  ClusterHeadParams head;
  RunRecord record;
};

/// Full-batch training. The returned parameters are the early-stopping best.
TrainResult train(const Graph& g, const CitConfig& config);

/// Inference: plain forward pass, never transferred.
DenseMatrix predict_logits(const GcnParams& params, const Graph& g);
DenseMatrix embed(const GcnParams& params, const Graph& g);
std::vector<int> cluster_assignments(const GcnParams& params, const ClusterHeadParams& head,
                                     const Graph& g);

EvalMetrics evaluate(const GcnParams& params, const Graph& g, const Mask& mask);

}  // namespace cit

#endif  // CIT_TRAINER_HPP
