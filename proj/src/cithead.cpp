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

#include "cit/cithead.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

#include "cit/errors.hpp"
#include "cit/rng.hpp"

namespace cit {
namespace {

using ad::Value;

DenseMatrix one_hot_column(std::size_t size, std::size_t index) {
  DenseMatrix e(size, 1);
  e(index, 0) = 1.0;
  return e;
}

// rows × cols selection matrix with a single 1 per row at picks[row].
std::shared_ptr<const SparseMatrix> selector(std::size_t cols, const std::vector<std::size_t>& picks) {
  std::vector<std::size_t> offsets(picks.size() + 1);
  for (std::size_t i = 0; i < picks.size(); ++i) offsets[i + 1] = i + 1;
  return std::make_shared<const SparseMatrix>(picks.size(), cols, std::move(offsets), picks,
                                              std::vector<double>(picks.size(), 1.0));
}

double population_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / n);
}

std::vector<double> column_sums(const DenseMatrix& s) {
  std::vector<double> out(s.cols(), 0.0);
  for (std::size_t r = 0; r < s.rows(); ++r)
    for (std::size_t c = 0; c < s.cols(); ++c) out[c] += s(r, c);
  return out;
}

}  // namespace

void ClusterHeadParams::validate() const {
  if (mlp_weight.cols() < 2) throw ValidationError("cluster head: need at least 2 clusters");
  if (mlp_bias.shape() != Shape{1, mlp_weight.cols()})
    throw ShapeError("cluster head: bias must be 1x" + std::to_string(mlp_weight.cols()));
}

ClusterHeadParams init_cluster_head(std::size_t hidden_dim, std::size_t clusters,
                                    std::uint64_t seed) {
  if (clusters < 2) throw ValidationError("cluster head: need at least 2 clusters");
  Rng rng = make_rng(seed, "cluster-head-init");
  const double limit = std::sqrt(6.0 / static_cast<double>(hidden_dim + clusters));
  std::uniform_real_distribution<double> u(-limit, limit);
  ClusterHeadParams p{DenseMatrix(hidden_dim, clusters), DenseMatrix(1, clusters)};
  for (double& v : p.mlp_weight.data()) v = u(rng);
  return p;
}

ClusterHeadBinding bind(ad::Tape& tape, const ClusterHeadParams& params) {
  params.validate();
  return {tape.leaf(params.mlp_weight), tape.leaf(params.mlp_bias)};
}

Value assign_clusters(const Value& z, const ClusterHeadBinding& head) {
  return ad::row_softmax(ad::broadcast_row_add(ad::matmul(z, head.weight), head.bias));
}

Value mincut_loss(const Value& s, const NormalizedAdjacency& adj) {
  if (s.shape().rows != adj.degrees.size())
    throw ShapeError("mincut_loss: S has " + std::to_string(s.shape().rows) + " rows, graph has " +
                     std::to_string(adj.degrees.size()) + " nodes");
  const Value st = ad::transpose(s);
  const Value num = ad::trace(ad::matmul(st, ad::spmm(adj.adjacency_tilde, s)));
  const Value den = ad::trace(ad::matmul(st, ad::spmm(adj.degree_matrix, s)));
  return ad::scale(ad::divide(num, den), -1.0);
}

Value ortho_loss(const Value& s) {
  const std::size_t m = s.shape().cols;
  bool any = false;
  for (double v : s.payload().data()) any = any || v != 0.0;
  if (!any) throw ValidationError("ortho_loss: S is all zeros");
  const Value gram = ad::matmul(ad::transpose(s), s);
  const Value norm = ad::broadcast_scalar(ad::frobenius_norm(gram), m, m);
  DenseMatrix target = DenseMatrix::identity(m);
  for (double& v : target.data()) v /= std::sqrt(static_cast<double>(m));
  return ad::frobenius_norm(ad::sub(ad::divide(gram, norm), s.tape().constant(std::move(target))));
}

Value clustering_objective(const Value& s, const NormalizedAdjacency& adj, double lambda1) {
  if (!(lambda1 >= 0.0)) throw ValidationError("clustering_objective: lambda1 must be >= 0");
  return ad::add(mincut_loss(s, adj), ad::scale(ortho_loss(s), lambda1));
}

std::size_t ClusterState::nonempty() const noexcept {
  return static_cast<std::size_t>(std::count(empty.begin(), empty.end(), false));
}

ClusterState cluster_stats(const Value& s, const Value& z, const StatsOptions& options) {
  const Shape ss = s.shape(), zs = z.shape();
  if (ss.rows != zs.rows)
    throw ShapeError("cluster_stats: S is " + ss.str() + " but Z is " + zs.str());
  const std::size_t n = zs.rows, h = zs.cols, m = ss.cols;
  ad::Tape& tape = z.tape();

  ClusterState state;
  state.assignment = s;
  state.masses = column_sums(s.payload());
  state.empty.resize(m);

  const Value ones_n = tape.constant(DenseMatrix(n, 1, 1.0));
  const Value ones_h = tape.constant(DenseMatrix(1, h, 1.0));
  Value centers, stds;
  for (std::size_t k = 0; k < m; ++k) {
    state.empty[k] = state.masses[k] < kEmptyClusterMass;
    Value center_k, std_k;
    if (state.empty[k]) {
      center_k = tape.constant(DenseMatrix(1, h, 0.0));
      std_k = tape.constant(DenseMatrix(1, h, 1.0));
    } else {
      const Value w = ad::matmul(s, tape.constant(one_hot_column(m, k)));  // n × 1
      center_k = ad::row_sum_weighted(z, w);
      Value mass;
      if (!options.unnormalized) {
        mass = ad::matmul(ad::row_sum_weighted(w, ones_n), ones_h);  // 1 × h
        center_k = ad::divide(center_k, mass);
      }
      const Value resid = ad::broadcast_row_add(z, ad::scale(center_k, -1.0));
      Value var_k = ad::row_sum_weighted(ad::square(resid), w);
      if (!options.unnormalized) var_k = ad::divide(var_k, mass);
      std_k = ad::sqrt(var_k);
    }
    const Value e = tape.constant(one_hot_column(m, k));
    const Value c_rows = ad::matmul(e, center_k);
    const Value s_rows = ad::matmul(e, std_k);
    centers = centers.valid() ? ad::add(centers, c_rows) : c_rows;
    stds = stds.valid() ? ad::add(stds, s_rows) : s_rows;
  }
  state.centers = centers;
  state.stds = stds;

  if (state.nonempty() >= 2) {
    auto g = gaussian_stats(state, options.literal_eq11);
    state.noise_mu = std::move(g.sigma_mu);
    state.noise_sigma = std::move(g.sigma_sigma);
  } else {
    state.noise_mu = DenseMatrix(1, h);
    state.noise_sigma = DenseMatrix(1, h);
  }
  return state;
}

GaussianStats gaussian_stats(const ClusterState& state, bool literal_eq11) {
  if (state.nonempty() < 2)
    throw ValidationError("gaussian_stats: need at least 2 nonempty clusters, have " +
                          std::to_string(state.nonempty()));
  const DenseMatrix& centers = state.centers.payload();
  const DenseMatrix& stds = state.stds.payload();
  const std::size_t h = centers.cols();
  GaussianStats out{DenseMatrix(1, h), DenseMatrix(1, h)};
  std::vector<double> cs, ss;
  for (std::size_t d = 0; d < h; ++d) {
    cs.clear();
    ss.clear();
    for (std::size_t k = 0; k < state.clusters(); ++k) {
      if (state.empty[k]) continue;
      cs.push_back(centers(k, d));
      ss.push_back(literal_eq11 ? stds(k, d) * stds(k, d) : stds(k, d));
    }
    out.sigma_mu(0, d) = population_std(cs);
    out.sigma_sigma(0, d) = population_std(ss);
  }
  return out;
}

std::vector<std::size_t> hard_assignments(const DenseMatrix& s) {
  std::vector<std::size_t> out(s.rows());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto row = s.row(r);
    out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

TransferPlan sample_transfer_plan(const DenseMatrix& s, std::span<const std::size_t> candidates,
                                  double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("sample_transfer_plan: p must lie in [0, 1]");
  const auto count =
      static_cast<std::size_t>(std::floor(static_cast<double>(candidates.size()) * p));
  TransferPlan plan;
  if (count == 0) return plan;

  const auto masses = column_sums(s);
  std::vector<std::size_t> nonempty;
  for (std::size_t k = 0; k < masses.size(); ++k)
    if (masses[k] >= kEmptyClusterMass) nonempty.push_back(k);
  if (nonempty.size() < 2)
    throw ValidationError("sample_transfer_plan: only one nonempty cluster; nowhere to transfer");

  Rng rng = make_rng(seed, "transfer-plan");
  std::vector<std::size_t> pool(candidates.begin(), candidates.end());
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  std::vector<std::size_t> options;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t node = pool[i];
    if (node >= s.rows()) throw ValidationError("sample_transfer_plan: candidate " + std::to_string(node) + " out of range");
    auto row = s.row(node);
    const auto source = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    options.clear();
    for (std::size_t k : nonempty)
      if (k != source) options.push_back(k);
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    plan.nodes.push_back(node);
    plan.targets.push_back(options[pick(rng)]);
  }
  return plan;
}

Value transfer_nodes(const Value& z, const ClusterState& state, const TransferPlan& plan,
                     const TransferOptions& options) {
  if (plan.nodes.size() != plan.targets.size())
    throw ValidationError("transfer_nodes: plan has mismatched node/target lists");
  if (plan.empty()) return z;

  const std::size_t n = z.shape().rows, h = z.shape().cols, m = state.clusters();
  const std::size_t t = plan.nodes.size();
  const auto sources = hard_assignments(state.assignment.payload());
  std::vector<bool> seen(n, false);
  for (std::size_t i = 0; i < t; ++i) {
    const std::size_t node = plan.nodes[i], target = plan.targets[i];
    if (node >= n) throw ValidationError("transfer_nodes: node id " + std::to_string(node) + " out of range");
    if (seen[node]) throw ValidationError("transfer_nodes: node " + std::to_string(node) + " listed twice");
    seen[node] = true;
    if (target >= m) throw ValidationError("transfer_nodes: target cluster " + std::to_string(target) + " out of range");
    if (state.empty[target]) throw ValidationError("transfer_nodes: target cluster " + std::to_string(target) + " is empty");
    if (!options.allow_same_cluster && target == sources[node])
      throw ValidationError("transfer_nodes: node " + std::to_string(node) +
                            " already belongs to target cluster " + std::to_string(target));
  }

  ad::Tape& tape = z.tape();
  std::vector<std::size_t> src(t);
  for (std::size_t i = 0; i < t; ++i) src[i] = sources[plan.nodes[i]];
  const auto pick_nodes = selector(n, plan.nodes);
  const auto pick_src = selector(m, src);
  const auto pick_tgt = selector(m, plan.targets);

  const Value z_sel = ad::spmm(pick_nodes, z);
  const Value residual = ad::divide(ad::sub(z_sel, ad::spmm(pick_src, state.centers)),
                                    ad::spmm(pick_src, state.stds));
  Value spread = ad::spmm(pick_tgt, state.stds);
  Value shift = ad::spmm(pick_tgt, state.centers);

  if (options.noise) {
    const std::size_t eps_cols = options.scalar_noise ? 1 : h;
    Rng rng = make_rng(options.seed, "transfer-eps");
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draws = [&](const std::optional<DenseMatrix>& given, const char* name) {
      if (given) {
        if (given->shape() != Shape{t, eps_cols})
          throw ShapeError(std::string("transfer_nodes: ") + name + " must be " +
                           Shape{t, eps_cols}.str() + ", got " + given->shape().str());
        return *given;
      }
      DenseMatrix e(t, eps_cols);
      for (double& v : e.data()) v = normal(rng);
      return e;
    };
    const DenseMatrix eps_mu = draws(options.eps_mu, "eps_mu");
    const DenseMatrix eps_sigma = draws(options.eps_sigma, "eps_sigma");
    DenseMatrix jitter_mu(t, h), jitter_sigma(t, h);
    for (std::size_t i = 0; i < t; ++i) {
      for (std::size_t d = 0; d < h; ++d) {
        const std::size_t c = options.scalar_noise ? 0 : d;
        jitter_mu(i, d) = eps_mu(i, c) * state.noise_mu(0, d);
        jitter_sigma(i, d) = eps_sigma(i, c) * state.noise_sigma(0, d);
      }
    }
    spread = ad::add(spread, tape.constant(std::move(jitter_sigma)));
    shift = ad::add(shift, tape.constant(std::move(jitter_mu)));
  }

  const Value moved = ad::add(ad::hadamard(spread, residual), shift);
  DenseMatrix keep(n, h, 1.0);
  for (std::size_t node : plan.nodes)
    for (double& v : keep.row(node)) v = 0.0;
  const auto scatter = std::make_shared<const SparseMatrix>(pick_nodes->transposed());
  return ad::add(ad::hadamard(z, tape.constant(std::move(keep))), ad::spmm(scatter, moved));
}

}  // namespace cit
