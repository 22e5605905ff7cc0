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

#include "cit/gradsuite.hpp"

#include <algorithm>
#include <memory>

#include "cit/backbone.hpp"
#include "cit/cithead.hpp"
#include "cit/graph.hpp"
#include "cit/rng.hpp"

namespace cit {
namespace {

using ad::OpKind;
using ad::Value;

constexpr std::size_t kNodes = 8;
constexpr double kOpTol = 1e-4;
constexpr double kLossTol = 1e-3;

class Instances {
 public:
  explicit Instances(std::uint64_t seed) : rng_(make_rng(seed, "gradient-suite")) {}

  DenseMatrix normal(std::size_t r, std::size_t c) {
    std::normal_distribution<double> d(0.0, 1.0);
    DenseMatrix m(r, c);
    for (double& v : m.data()) v = d(rng_);
    return m;
  }

  // Magnitudes in [lo, hi] with random sign (keeps ReLU and division away from 0).
  DenseMatrix away_from_zero(std::size_t r, std::size_t c, double lo, double hi, bool signed_values = true) {
    std::uniform_real_distribution<double> mag(lo, hi);
    std::bernoulli_distribution flip(0.5);
    DenseMatrix m(r, c);
    for (double& v : m.data()) v = (signed_values && flip(rng_) ? -1.0 : 1.0) * mag(rng_);
    return m;
  }

  // Random connected graph: a path plus extra random edges.
  SparseMatrix graph(std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    std::bernoulli_distribution extra(0.3);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 2; j < n; ++j)
        if (extra(rng_)) edges.emplace_back(i, j);
    return adjacency_from_edges(n, edges);
  }

  std::vector<std::size_t> labels(std::size_t n, std::size_t classes) {
    std::uniform_int_distribution<std::size_t> d(0, classes - 1);
    std::vector<std::size_t> out(n);
    for (auto& v : out) v = d(rng_);
    return out;
  }

 private:
  Rng rng_;
};

// Projects a matrix-valued output to a scalar with fixed random weights so
// every output entry contributes a distinct coefficient.
ad::ScalarFn projected(std::function<Value(ad::Tape&, std::span<const Value>)> op, DenseMatrix weights) {
  return [op = std::move(op), w = std::move(weights)](ad::Tape& t, std::span<const Value> v) {
    return ad::weighted_sum(op(t, v), w);
  };
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed) {
  Instances in(seed);
  std::vector<GradSuiteEntry> out;
  auto check = [&](std::string name, const ad::ScalarFn& f, std::vector<DenseMatrix> point, double tol) {
    out.push_back({std::move(name), tol, ad::grad_check(f, point, 1e-5, tol)});
  };
  auto op_check = [&](OpKind op, std::function<Value(ad::Tape&, std::span<const Value>)> fn,
                      std::vector<DenseMatrix> point, Shape result) {
    check(std::string(ad::op_name(op)), projected(std::move(fn), in.normal(result.rows, result.cols)),
          std::move(point), kOpTol);
  };

  const std::size_t n = kNodes;
  const auto adjacency = std::make_shared<const SparseMatrix>(in.graph(n));
  const NormalizedAdjacency norm = normalize_adjacency(*adjacency);

  op_check(OpKind::Leaf, [](ad::Tape&, std::span<const Value> v) { return v[0]; }, {in.normal(n, 3)}, {n, 3});
  op_check(OpKind::MatMul, [](ad::Tape&, std::span<const Value> v) { return ad::matmul(v[0], v[1]); },
           {in.normal(n, 3), in.normal(3, 4)}, {n, 4});
  op_check(OpKind::SpMM, [&](ad::Tape&, std::span<const Value> v) { return ad::spmm(norm.matrix, v[0]); },
           {in.normal(n, 3)}, {n, 3});
  op_check(OpKind::Add, [](ad::Tape&, std::span<const Value> v) { return ad::add(v[0], v[1]); },
           {in.normal(n, 3), in.normal(n, 3)}, {n, 3});
  op_check(OpKind::Sub, [](ad::Tape&, std::span<const Value> v) { return ad::sub(v[0], v[1]); },
           {in.normal(n, 3), in.normal(n, 3)}, {n, 3});
  op_check(OpKind::ElemMul, [](ad::Tape&, std::span<const Value> v) { return ad::hadamard(v[0], v[1]); },
           {in.normal(n, 3), in.normal(n, 3)}, {n, 3});
  op_check(OpKind::ElemDiv, [](ad::Tape&, std::span<const Value> v) { return ad::divide(v[0], v[1]); },
           {in.normal(n, 3), in.away_from_zero(n, 3, 0.5, 1.5)}, {n, 3});
  op_check(OpKind::Scale, [](ad::Tape&, std::span<const Value> v) { return ad::scale(v[0], -1.7); },
           {in.normal(n, 3)}, {n, 3});
  op_check(OpKind::ReLU, [](ad::Tape&, std::span<const Value> v) { return ad::relu(v[0]); },
           {in.away_from_zero(n, 3, 0.1, 1.0)}, {n, 3});
  op_check(OpKind::RowSoftmax, [](ad::Tape&, std::span<const Value> v) { return ad::row_softmax(v[0]); },
           {in.normal(n, 4)}, {n, 4});
  {
    const std::vector<std::size_t> rows{0, 2, 3, 5, 7};
    const auto labels = in.labels(rows.size(), 3);
    check(std::string(ad::op_name(OpKind::LogSoftmaxCrossEntropy)),
          [rows, labels](ad::Tape&, std::span<const Value> v) {
            return ad::softmax_cross_entropy(v[0], rows, labels);
          },
          {in.normal(n, 3)}, kOpTol);
  }
  op_check(OpKind::Trace, [](ad::Tape&, std::span<const Value> v) { return ad::trace(v[0]); },
           {in.normal(4, 4)}, {1, 1});
  op_check(OpKind::FrobeniusNorm, [](ad::Tape&, std::span<const Value> v) { return ad::frobenius_norm(v[0]); },
           {in.normal(n, 3)}, {1, 1});
  op_check(OpKind::Sqrt, [](ad::Tape&, std::span<const Value> v) { return ad::sqrt(v[0]); },
           {in.away_from_zero(n, 3, 0.5, 2.0, false)}, {n, 3});
  op_check(OpKind::Square, [](ad::Tape&, std::span<const Value> v) { return ad::square(v[0]); },
           {in.normal(n, 3)}, {n, 3});
  op_check(OpKind::RowSumWeighted,
           [](ad::Tape&, std::span<const Value> v) { return ad::row_sum_weighted(v[0], v[1]); },
           {in.normal(n, 3), in.normal(n, 1)}, {1, 3});
  op_check(OpKind::Transpose, [](ad::Tape&, std::span<const Value> v) { return ad::transpose(v[0]); },
           {in.normal(n, 3)}, {3, n});
  op_check(OpKind::BroadcastRowAdd,
           [](ad::Tape&, std::span<const Value> v) { return ad::broadcast_row_add(v[0], v[1]); },
           {in.normal(n, 3), in.normal(1, 3)}, {n, 3});

  // Composed losses. Leaves: representation Z (n × h) and head weights.
  const std::size_t h = 4, m = 2;
  const DenseMatrix z = in.normal(n, h);
  const DenseMatrix head_w = in.normal(h, m), head_b = in.normal(1, m);
  check("L_c (mincut)",
        [&](ad::Tape&, std::span<const Value> v) {
          return mincut_loss(assign_clusters(v[0], {v[1], v[2]}), norm);
        },
        {z, head_w, head_b}, kLossTol);
  check("L_o (orthogonality)",
        [&](ad::Tape&, std::span<const Value> v) { return ortho_loss(assign_clusters(v[0], {v[1], v[2]})); },
        {z, head_w, head_b}, kLossTol);

  // Backbone and classifier: x (n × d) → 2 GCN layers → logits over 2 classes.
  const std::size_t d = 5, classes = 2;
  const DenseMatrix x = in.normal(n, d);
  const std::vector<std::size_t> train_rows{0, 1, 3, 4, 6};
  const auto train_labels = in.labels(train_rows.size(), classes);
  const std::vector<DenseMatrix> gcn_point{in.normal(d, h), in.normal(h, h), in.normal(h, classes),
                                           in.normal(1, classes)};
  auto encoder = [&](ad::Tape& t, std::span<const Value> v) {
    GcnBinding b;
    b.layer_weights = {v[0], v[1]};
    b.classifier_weight = v[2];
    b.classifier_bias = v[3];
    return std::pair{gcn_forward(norm, t.constant(x), b), b};
  };
  check("L_f (classification)",
        [&](ad::Tape& t, std::span<const Value> v) {
          auto [zz, b] = encoder(t, v);
          return ad::softmax_cross_entropy(classify(zz, b), train_rows, train_labels);
        },
        gcn_point, kLossTol);

  // Full objective with a transfer on two high-margin nodes, so finite
  // differences never flip a node's source cluster.
  std::vector<DenseMatrix> full = gcn_point;
  full.push_back(head_w);
  full.push_back(head_b);
  TransferPlan plan;
  {
    ad::Tape t;
    std::vector<Value> leaves;
    for (const auto& p : full) leaves.push_back(t.leaf(p));
    const DenseMatrix s = assign_clusters(encoder(t, leaves).first, {leaves[4], leaves[5]}).payload();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    auto margin = [&](std::size_t r) { return std::abs(s(r, 0) - s(r, 1)); };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return margin(a) > margin(b); });
    const auto source = hard_assignments(s);
    for (std::size_t k = 0; k < 2; ++k) {
      plan.nodes.push_back(order[k]);
      plan.targets.push_back(1 - source[order[k]]);
    }
  }
  check("objective (alpha_f L_f + alpha_c L_c + alpha_o L_o, with transfer)",
        [&](ad::Tape& t, std::span<const Value> v) {
          auto [zz, b] = encoder(t, v);
          const ClusterHeadBinding hb{v[4], v[5]};
          const Value s = assign_clusters(zz, hb);
          const ClusterState state = cluster_stats(s, zz);
          const Value moved = transfer_nodes(zz, state, plan);
          const Value lf = ad::softmax_cross_entropy(classify(moved, b), train_rows, train_labels);
          return ad::add(ad::add(ad::scale(lf, 0.5), ad::scale(mincut_loss(s, norm), 0.3)),
                         ad::scale(ortho_loss(s), 0.2));
        },
        full, kLossTol);
  return out;
}

}  // namespace cit
