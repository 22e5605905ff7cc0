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

// Differentiable clustering head and cluster information transfer.
//
// The head maps node representations Z (n×h) to a row-stochastic soft
// assignment S (n×m). S is trained with the normalized mincut loss and the
// orthogonality loss. From S and Z we form per-cluster centers and
// per-dimension spreads; a transfer re-standardizes a node from its own
// cluster's statistics to another cluster's:
//
//   z' = (σ_j + ε_σ·Σ_σ) ⊙ (z − c_k) / σ_k + (c_j + ε_μ·Σ_μ)
//
// where k is the node's cluster (argmax of its S row) and j the target. The
// standardized residual (z − c_k)/σ_k is what survives the move.

#ifndef CIT_CITHEAD_HPP
#define CIT_CITHEAD_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cit/autodiff.hpp"
#include "cit/graph.hpp"

namespace cit {

// Clusters whose total soft mass is below this are treated as empty.
inline constexpr double kEmptyClusterMass = 1e-8;

struct ClusterHeadParams {
  DenseMatrix mlp_weight;  // h × m
  DenseMatrix mlp_bias;    // 1 × m

  std::size_t clusters() const noexcept { return mlp_weight.cols(); }
  void validate() const;
};

ClusterHeadParams init_cluster_head(std::size_t hidden_dim, std::size_t clusters,
                                    std::uint64_t seed);

struct ClusterHeadBinding {
  ad::Value weight;
  ad::Value bias;
};

ClusterHeadBinding bind(ad::Tape& tape, const ClusterHeadParams& params);

/// S = softmax(z·W + b), row-wise.
ad::Value assign_clusters(const ad::Value& z, const ClusterHeadBinding& head);

/// −Tr(SᵀÃS) / Tr(SᵀD̃S); lies in [−1, 0] for row-stochastic S.
ad::Value mincut_loss(const ad::Value& s, const NormalizedAdjacency& adj);

/// ‖SᵀS/‖SᵀS‖_F − I/√m‖_F; lies in [0, √2).
ad::Value ortho_loss(const ad::Value& s);

/// mincut + lambda1 · ortho
ad::Value clustering_objective(const ad::Value& s, const NormalizedAdjacency& adj, double lambda1);

struct StatsOptions {
  // Use the raw weighted sums SᵀZ and Σ s(z − c)² instead of mass-normalized means.
  bool unnormalized = false;
  // Σ_σ as the spread of per-cluster variances rather than of per-cluster stds.
  bool literal_eq11 = false;
};

struct ClusterState {
  ad::Value assignment;         // S, n × m
  std::vector<double> masses;   // Σ_i s_ik
  ad::Value centers;            // m × h
  ad::Value stds;               // m × h
  std::vector<bool> empty;      // mass below kEmptyClusterMass
  DenseMatrix noise_mu;         // Σ_μ, 1 × h (zero with < 2 nonempty clusters)
  DenseMatrix noise_sigma;      // Σ_σ, 1 × h

  std::size_t clusters() const noexcept { return masses.size(); }
  std::size_t nonempty() const noexcept;
};

/// Centers and per-dimension spreads. Empty clusters get center 0, std 1.
ClusterState cluster_stats(const ad::Value& s, const ad::Value& z, const StatsOptions& options = {});

struct GaussianStats {
  DenseMatrix sigma_mu;     // 1 × h
  DenseMatrix sigma_sigma;  // 1 × h
};

/// Population spread across the nonempty clusters, per dimension. Treated as
/// constants: gradients do not flow through them.
GaussianStats gaussian_stats(const ClusterState& state, bool literal_eq11 = false);

struct TransferPlan {
  std::vector<std::size_t> nodes;
  std::vector<std::size_t> targets;

  bool empty() const noexcept { return nodes.empty(); }
};

/// argmax of each S row (first index on ties).
std::vector<std::size_t> hard_assignments(const DenseMatrix& s);

/// Picks floor(|candidates|·p) candidates uniformly; each gets a target drawn
/// uniformly from the nonempty clusters other than its own.
TransferPlan sample_transfer_plan(const DenseMatrix& s, std::span<const std::size_t> candidates,
                                  double p, std::uint64_t seed);

struct TransferOptions {
  bool noise = false;
  // Supplied draws (plan size × h, or plan size × 1 with scalar_noise). When
  // absent they are drawn from `seed`.
  std::optional<DenseMatrix> eps_mu;
  std::optional<DenseMatrix> eps_sigma;
  std::uint64_t seed = 0;
  bool scalar_noise = false;
  // Test hook: skip the target != source precondition.
  bool allow_same_cluster = false;
};

/// Replaces the planned rows of z by their transferred representations.
/// Rows outside the plan are passed through unchanged.
ad::Value transfer_nodes(const ad::Value& z, const ClusterState& state, const TransferPlan& plan,
                         const TransferOptions& options = {});

}  // namespace cit

#endif  // CIT_CITHEAD_HPP
