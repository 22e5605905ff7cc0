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

#ifndef CIT_GRAPH_HPP
#define CIT_GRAPH_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "cit/matrix.hpp"

namespace cit {

using Mask = std::vector<bool>;

struct Split {
  Mask train;
  Mask val;
  Mask test;
};

/// Undirected attributed graph with node labels and a node split.
///
/// `adjacency` is binary, symmetric, with an empty diagonal. Graphs are
/// treated as values: the perturbation routines return new graphs.
struct Graph {
  SparseMatrix adjacency;
  DenseMatrix features;        // n × d
  std::vector<int> labels;     // class ids in [0, num_classes)
  int num_classes = 0;
  Split split;

  std::size_t num_nodes() const noexcept { return labels.size(); }
  std::size_t num_edges() const noexcept { return adjacency.nnz() / 2; }
  std::size_t feature_dim() const noexcept { return features.cols(); }

  /// Throws ValidationError if any structural invariant is broken.
  void validate() const;
};

std::vector<std::size_t> mask_indices(const Mask& mask);

/// D̃^{-1/2}(A + I)D̃^{-1/2} plus the pieces the clustering losses need.
struct NormalizedAdjacency {
  std::shared_ptr<const SparseMatrix> matrix;           // propagation operator
  std::shared_ptr<const SparseMatrix> adjacency_tilde;  // A + I
  std::shared_ptr<const SparseMatrix> degree_matrix;    // diag(D̃)
  std::vector<double> degrees;                          // D̃_ii
};

NormalizedAdjacency normalize_adjacency(const SparseMatrix& adjacency);

/// Builds a binary symmetric adjacency from undirected pairs; self-loops are
/// rejected and duplicates (in either orientation) collapse.
SparseMatrix adjacency_from_edges(std::size_t n,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// Each undirected edge once, as (i, j) with i < j, in row-major order.
std::vector<std::pair<std::size_t, std::size_t>> edge_list(const SparseMatrix& adjacency);

struct SbmSpec {
  std::vector<std::size_t> block_sizes;
  std::vector<std::vector<double>> edge_prob;  // symmetric, entries in [0, 1]
  std::size_t feature_dim = 0;
  DenseMatrix class_means;                     // blocks × feature_dim
  double class_std = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Class means drawn from N(0, 1) and scaled by `separation`.
DenseMatrix make_class_means(std::size_t classes, std::size_t dim, double separation,
                             std::uint64_t seed);

/// Labels are block ids in block order. The split is left empty.
Graph sbm_generate(const SbmSpec& spec);

/// Edge structure only; draws the same stream sbm_generate uses for edges.
SparseMatrix sbm_edges(const std::vector<std::size_t>& block_sizes,
                       const std::vector<std::vector<double>>& edge_prob, std::uint64_t seed);

Graph with_adjacency(const Graph& g, SparseMatrix adjacency);

/// Adds floor(ratio·|E|) edges drawn uniformly from the non-edges.
Graph perturb_add_edges(const Graph& g, double ratio, std::uint64_t seed);
/// Removes floor(ratio·|E|) edges chosen uniformly.
Graph perturb_delete_edges(const Graph& g, double ratio, std::uint64_t seed);

/// train_per_class training nodes for every class, val_count validation
/// nodes from the remainder, everything else for testing.
Split split_nodes(const Graph& g, std::size_t train_per_class, std::size_t val_count,
                  std::uint64_t seed);

struct GraphFiles {
  std::filesystem::path edges;
  std::filesystem::path features;
  std::filesystem::path labels;
  std::optional<std::filesystem::path> split;
};

Graph load_graph(const GraphFiles& files);
void save_graph(const Graph& g, const GraphFiles& files);

}  // namespace cit

#endif  // CIT_GRAPH_HPP
