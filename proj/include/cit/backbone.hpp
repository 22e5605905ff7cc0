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

#ifndef CIT_BACKBONE_HPP
#define CIT_BACKBONE_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cit/autodiff.hpp"
#include "cit/graph.hpp"
#include "cit/rng.hpp"

namespace cit {

/// GCN encoder weights (d → h → … → h) plus the linear classifier (h → C).
struct GcnParams {
  std::vector<DenseMatrix> layer_weights;
  DenseMatrix classifier_weight;  // h × C
  DenseMatrix classifier_bias;    // 1 × C

  std::size_t input_dim() const { return layer_weights.front().rows(); }
  std::size_t hidden_dim() const { return layer_weights.back().cols(); }
  std::size_t num_classes() const { return classifier_weight.cols(); }

  void validate() const;
};

/// Glorot-uniform weights, zero bias.
GcnParams init_gcn_params(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes,
                          std::size_t layers, std::uint64_t seed);

/// GcnParams registered as leaves of one tape.
struct GcnBinding {
  std::vector<ad::Value> layer_weights;
  ad::Value classifier_weight;
  ad::Value classifier_bias;
};

GcnBinding bind(ad::Tape& tape, const GcnParams& params);

/// Training-time inverted dropout. Inactive when rng is null or rate is 0.
struct Dropout {
  double rate = 0.0;
  Rng* rng = nullptr;
};

ad::Value apply_dropout(const ad::Value& x, const Dropout& dropout);

/// Z^(L): L rounds of Â·Z·W with ReLU between layers and none after the last.
ad::Value gcn_forward(const NormalizedAdjacency& adj, const ad::Value& x, const GcnBinding& params,
                      const Dropout& dropout = {});

/// Logits z·W + b; the softmax lives in the loss.
ad::Value classify(const ad::Value& z, const GcnBinding& params);

// Checkpoints: a versioned text table of named row-major matrices.
//
//   cit-checkpoint 1
//   matrix <name> <rows> <cols>
//   <cols values>            (one line per row, %.17g)
//   ...
struct NamedMatrix {
  std::string name;
  DenseMatrix value;
};

void write_checkpoint(std::ostream& out, const std::vector<NamedMatrix>& matrices);
std::vector<NamedMatrix> read_checkpoint(std::istream& in);

std::vector<NamedMatrix> to_named(const GcnParams& params);
GcnParams gcn_params_from_named(const std::vector<NamedMatrix>& matrices);

}  // namespace cit

#endif  // CIT_BACKBONE_HPP
