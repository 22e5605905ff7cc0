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

// Reverse-mode differentiation over dense matrices.
//
// A Tape owns every value computed during one forward pass. Forward results
// are evaluated eagerly when an op is recorded; backward() walks the tape in
// reverse and accumulates adjoints. Values are cheap (tape, index) handles and
// stay valid for the lifetime of their tape.
//
// A tape must be confined to a single thread.

#ifndef CIT_AUTODIFF_HPP
#define CIT_AUTODIFF_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "cit/matrix.hpp"

namespace cit::ad {

enum class OpKind {
  Leaf,
  MatMul,
  SpMM,
  Add,
  Sub,
  ElemMul,
  ElemDiv,
  Scale,
  ReLU,
  RowSoftmax,
  LogSoftmaxCrossEntropy,
  Trace,
  FrobeniusNorm,
  Sqrt,
  Square,
  RowSumWeighted,
  Transpose,
  BroadcastRowAdd,
};

inline constexpr OpKind kAllOps[] = {
    OpKind::Leaf,         OpKind::MatMul,         OpKind::SpMM,
    OpKind::Add,          OpKind::Sub,            OpKind::ElemMul,
    OpKind::ElemDiv,      OpKind::Scale,          OpKind::ReLU,
    OpKind::RowSoftmax,   OpKind::LogSoftmaxCrossEntropy,
    OpKind::Trace,        OpKind::FrobeniusNorm,  OpKind::Sqrt,
    OpKind::Square,       OpKind::RowSumWeighted, OpKind::Transpose,
    OpKind::BroadcastRowAdd,
};

std::string_view op_name(OpKind op) noexcept;

// Divisors in ElemDiv are clamped to this magnitude, keeping their sign.
inline constexpr double kDivisorFloor = 1e-12;

/// Op-specific constants.
struct OpAux {
  std::shared_ptr<const SparseMatrix> sparse;  // SpMM: left operand
  double scalar = 0.0;                         // Scale: factor
  std::vector<std::size_t> rows;               // LogSoftmaxCrossEntropy: row subset
  std::vector<std::size_t> labels;             // LogSoftmaxCrossEntropy: class per subset row
};

class Tape;

class Value {
 public:
  Value() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  std::size_t id() const noexcept { return id_; }
  Tape& tape() const noexcept { return *tape_; }
  Shape shape() const;
  const DenseMatrix& payload() const;
  const DenseMatrix& grad() const;

 private:
  friend class Tape;
  Value(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Result of one backward pass: adjoint of the loss for every tape entry.
class Gradients {
 public:
  explicit Gradients(std::vector<DenseMatrix> grads) : grads_(std::move(grads)) {}

  const DenseMatrix& operator[](const Value& v) const { return grads_.at(v.id()); }
  const DenseMatrix& at(std::size_t id) const { return grads_.at(id); }
  std::size_t size() const noexcept { return grads_.size(); }

 private:
  std::vector<DenseMatrix> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable input; receives gradients.
  Value leaf(DenseMatrix m);
  /// Input that never receives gradients (data, masks, selection matrices).
  Value constant(DenseMatrix m);

  /// Appends `op` applied to `parents`, evaluating the forward rule eagerly.
  /// Throws ShapeError on incompatible operands and NumericalError when the
  /// result is not finite.
  Value record(OpKind op, std::span<const Value> parents, OpAux aux = {});

  /// Reverse sweep from a 1x1 loss. Leaf `grad()` buffers accumulate across
  /// calls until zero_grad(); the returned table holds this pass only.
  Gradients backward(const Value& loss);

  void zero_grad();

  std::size_t size() const noexcept { return nodes_.size(); }
  OpKind op(std::size_t id) const { return nodes_.at(id).op; }
  std::span<const std::size_t> parents(std::size_t id) const { return nodes_.at(id).parents; }
  const DenseMatrix& payload(std::size_t id) const { return nodes_.at(id).payload; }
  const DenseMatrix& grad(std::size_t id) const { return nodes_.at(id).grad; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

 private:
  struct Node {
    OpKind op = OpKind::Leaf;
    std::vector<std::size_t> parents;
    OpAux aux;
    DenseMatrix payload;
    DenseMatrix grad;
    bool requires_grad = false;
  };

  Value push_leaf(DenseMatrix m, bool requires_grad);
  void backprop_node(std::size_t id, const DenseMatrix& g, std::vector<DenseMatrix>& adj) const;

  std::vector<Node> nodes_;
};

// Thin wrappers around Tape::record.
Value matmul(const Value& a, const Value& b);
Value spmm(std::shared_ptr<const SparseMatrix> a, const Value& b);
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value hadamard(const Value& a, const Value& b);
Value divide(const Value& a, const Value& b);
Value scale(const Value& a, double factor);
Value relu(const Value& a);
Value row_softmax(const Value& a);
/// Mean over `rows` of -log softmax(logits[row])[label].
Value softmax_cross_entropy(const Value& logits, std::vector<std::size_t> rows,
                            std::vector<std::size_t> labels);
Value trace(const Value& a);
Value frobenius_norm(const Value& a);
Value sqrt(const Value& a);
Value square(const Value& a);
/// wᵀ·x for x (n×h) and w (n×1): the weight-summed row of x.
Value row_sum_weighted(const Value& x, const Value& w);
Value transpose(const Value& a);
Value broadcast_row_add(const Value& x, const Value& row);

// Composites.
/// Σ_ij weights_ij · y_ij as a 1x1 value.
Value weighted_sum(const Value& y, const DenseMatrix& weights);
Value sum(const Value& y);
/// Repeats a 1x1 value into a rows×cols matrix.
Value broadcast_scalar(const Value& s, std::size_t rows, std::size_t cols);

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool passed = true;
  std::size_t entries_checked = 0;
  // Per leaf, per entry (row-major): relative error and verdict.
  std::vector<std::vector<double>> rel_errors;
  std::vector<std::vector<bool>> entry_passed;
};

using ScalarFn = std::function<Value(Tape&, std::span<const Value>)>;

// Differences at or below this are treated as exact agreement.
inline constexpr double kGradCheckAbsFloor = 1e-8;

/// Compares backward() against central differences at `point`, one leaf per
/// element of `point`. eps must lie in (0, 1e-2].
GradCheckReport grad_check(const ScalarFn& f, std::span<const DenseMatrix> point,
                           double eps = 1e-5, double tol = 1e-4);

}  // namespace cit::ad

#endif  // CIT_AUTODIFF_HPP
