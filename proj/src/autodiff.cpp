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

#include "cit/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cit/errors.hpp"

namespace cit::ad {
namespace {

double clamp_divisor(double v) {
  if (std::abs(v) >= kDivisorFloor) return v;
  return v < 0.0 ? -kDivisorFloor : kDivisorFloor;
}

[[noreturn]] void shape_error(OpKind op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + a.str() + " and " +
                   b.str());
}

[[noreturn]] void shape_error(OpKind op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op_name(op)) + ": operand " + a.str() + " " + why);
}

template <typename F>
DenseMatrix map(const DenseMatrix& a, F f) {
  DenseMatrix out(a.rows(), a.cols());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <typename F>
DenseMatrix zip(const DenseMatrix& a, const DenseMatrix& b, F f) {
  DenseMatrix out(a.rows(), a.cols());
  auto x = a.data();
  auto y = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

void accumulate(DenseMatrix& into, const DenseMatrix& delta) {
  if (into.size() == 0 && delta.size() != 0) {
    into = delta;
    return;
  }
  auto dst = into.data();
  auto src = delta.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

DenseMatrix softmax_rows(const DenseMatrix& x) {
  DenseMatrix y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp(in[c] - mx);
      total += out[c];
    }
    for (double& v : out) v /= total;
  }
  return y;
}

void require_same_shape(OpKind op, const DenseMatrix& a, const DenseMatrix& b) {
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

std::size_t expected_arity(OpKind op) {
  switch (op) {
    case OpKind::Leaf: return 0;
    case OpKind::SpMM:
    case OpKind::Scale:
    case OpKind::ReLU:
    case OpKind::RowSoftmax:
    case OpKind::LogSoftmaxCrossEntropy:
    case OpKind::Trace:
    case OpKind::FrobeniusNorm:
    case OpKind::Sqrt:
    case OpKind::Square:
    case OpKind::Transpose: return 1;
    default: return 2;
  }
}

DenseMatrix forward(OpKind op, std::span<const DenseMatrix* const> in, const OpAux& aux) {
  switch (op) {
    case OpKind::Leaf:
      throw Error("record: Leaf values are created with Tape::leaf/constant");
    case OpKind::MatMul: {
      const auto& a = *in[0];
      const auto& b = *in[1];
      if (a.cols() != b.rows()) shape_error(op, a.shape(), b.shape());
      return matmul(a, b);
    }
    case OpKind::SpMM: {
      if (!aux.sparse) throw Error("SpMM: missing sparse operand");
      const auto& b = *in[0];
      if (aux.sparse->cols() != b.rows()) shape_error(op, aux.sparse->shape(), b.shape());
      return spmm(*aux.sparse, b);
    }
    case OpKind::Add:
      require_same_shape(op, *in[0], *in[1]);
      return zip(*in[0], *in[1], [](double x, double y) { return x + y; });
    case OpKind::Sub:
      require_same_shape(op, *in[0], *in[1]);
      return zip(*in[0], *in[1], [](double x, double y) { return x - y; });
    case OpKind::ElemMul:
      require_same_shape(op, *in[0], *in[1]);
      return zip(*in[0], *in[1], [](double x, double y) { return x * y; });
    case OpKind::ElemDiv:
      require_same_shape(op, *in[0], *in[1]);
      return zip(*in[0], *in[1], [](double x, double y) { return x / clamp_divisor(y); });
    case OpKind::Scale:
      return map(*in[0], [s = aux.scalar](double x) { return s * x; });
    case OpKind::ReLU:
      return map(*in[0], [](double x) { return x > 0.0 ? x : 0.0; });
    case OpKind::RowSoftmax:
      if (in[0]->cols() == 0) shape_error(op, in[0]->shape(), "has no columns");
      return softmax_rows(*in[0]);
    case OpKind::LogSoftmaxCrossEntropy: {
      const auto& x = *in[0];
      if (aux.rows.empty() || aux.rows.size() != aux.labels.size())
        shape_error(op, x.shape(), "needs a nonempty row subset with one label per row");
      double total = 0.0;
      for (std::size_t i = 0; i < aux.rows.size(); ++i) {
        const std::size_t r = aux.rows[i];
        const std::size_t label = aux.labels[i];
        if (r >= x.rows()) shape_error(op, x.shape(), "row " + std::to_string(r) + " out of range");
        if (label >= x.cols())
          shape_error(op, x.shape(), "label " + std::to_string(label) + " out of range");
        auto row = x.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double acc = 0.0;
        for (double v : row) acc += std::exp(v - mx);
        total += mx + std::log(acc) - row[label];
      }
      return DenseMatrix(1, 1, total / static_cast<double>(aux.rows.size()));
    }
    case OpKind::Trace: {
      const auto& a = *in[0];
      if (a.rows() != a.cols()) shape_error(op, a.shape(), "is not square");
      double t = 0.0;
      for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i);
      return DenseMatrix(1, 1, t);
    }
    case OpKind::FrobeniusNorm: {
      double ss = 0.0;
      for (double v : in[0]->data()) ss += v * v;
      return DenseMatrix(1, 1, std::sqrt(ss));
    }
    case OpKind::Sqrt:
      for (double v : in[0]->data())
        if (v < 0.0) throw NumericalError("Sqrt: negative input " + std::to_string(v));
      return map(*in[0], [](double x) { return std::sqrt(x); });
    case OpKind::Square:
      return map(*in[0], [](double x) { return x * x; });
    case OpKind::RowSumWeighted: {
      const auto& x = *in[0];
      const auto& w = *in[1];
      if (w.cols() != 1 || w.rows() != x.rows()) shape_error(op, x.shape(), w.shape());
      DenseMatrix out(1, x.cols());
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const double wr = w(r, 0);
        auto xr = x.row(r);
        for (std::size_t c = 0; c < x.cols(); ++c) out(0, c) += wr * xr[c];
      }
      return out;
    }
    case OpKind::Transpose:
      return in[0]->transposed();
    case OpKind::BroadcastRowAdd: {
      const auto& x = *in[0];
      const auto& b = *in[1];
      if (b.rows() != 1 || b.cols() != x.cols()) shape_error(op, x.shape(), b.shape());
      DenseMatrix out = x;
      for (std::size_t r = 0; r < x.rows(); ++r) {
        auto row = out.row(r);
        for (std::size_t c = 0; c < x.cols(); ++c) row[c] += b(0, c);
      }
      return out;
    }
  }
  throw Error("record: unknown op");
}

}  // namespace

std::string_view op_name(OpKind op) noexcept {
  switch (op) {
    case OpKind::Leaf: return "Leaf";
    case OpKind::MatMul: return "MatMul";
    case OpKind::SpMM: return "SpMM";
    case OpKind::Add: return "Add";
    case OpKind::Sub: return "Sub";
    case OpKind::ElemMul: return "ElemMul";
    case OpKind::ElemDiv: return "ElemDiv";
    case OpKind::Scale: return "Scale";
    case OpKind::ReLU: return "ReLU";
    case OpKind::RowSoftmax: return "RowSoftmax";
    case OpKind::LogSoftmaxCrossEntropy: return "LogSoftmaxCrossEntropy";
    case OpKind::Trace: return "Trace";
    case OpKind::FrobeniusNorm: return "FrobeniusNorm";
    case OpKind::Sqrt: return "Sqrt";
    case OpKind::Square: return "Square";
    case OpKind::RowSumWeighted: return "RowSumWeighted";
    case OpKind::Transpose: return "Transpose";
    case OpKind::BroadcastRowAdd: return "BroadcastRowAdd";
  }
  return "?";
}

Shape Value::shape() const { return tape_->payload(id_).shape(); }
const DenseMatrix& Value::payload() const { return tape_->payload(id_); }
const DenseMatrix& Value::grad() const { return tape_->grad(id_); }

Value Tape::push_leaf(DenseMatrix m, bool requires_grad) {
  if (!m.all_finite()) throw NumericalError("Leaf: non-finite input " + m.shape().str());
  Node node;
  node.op = OpKind::Leaf;
  node.grad = DenseMatrix(m.rows(), m.cols());
  node.payload = std::move(m);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Value(this, nodes_.size() - 1);
}

Value Tape::leaf(DenseMatrix m) { return push_leaf(std::move(m), true); }
Value Tape::constant(DenseMatrix m) { return push_leaf(std::move(m), false); }

Value Tape::record(OpKind op, std::span<const Value> parents, OpAux aux) {
  if (parents.size() != expected_arity(op)) {
    throw Error(std::string(op_name(op)) + ": expected " + std::to_string(expected_arity(op)) +
                " operands, got " + std::to_string(parents.size()));
  }
  std::vector<const DenseMatrix*> inputs;
  Node node;
  node.op = op;
  for (const auto& p : parents) {
    if (p.tape_ != this) throw Error(std::string(op_name(op)) + ": operand from another tape");
    inputs.push_back(&nodes_[p.id_].payload);
    node.parents.push_back(p.id_);
    node.requires_grad = node.requires_grad || nodes_[p.id_].requires_grad;
  }
  node.payload = forward(op, inputs, aux);
  if (!node.payload.all_finite()) {
    throw NumericalError(std::string(op_name(op)) + ": non-finite result of shape " +
                         node.payload.shape().str());
  }
  node.aux = std::move(aux);
  nodes_.push_back(std::move(node));
  return Value(this, nodes_.size() - 1);
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad.fill(0.0);
}

Gradients Tape::backward(const Value& loss) {
  if (loss.tape_ != this) throw Error("backward: loss from another tape");
  const Shape s = payload(loss.id_).shape();
  if (s != Shape{1, 1}) throw ShapeError("backward: loss must be 1x1, got " + s.str());

  std::vector<DenseMatrix> adj(nodes_.size());
  adj[loss.id_] = DenseMatrix(1, 1, 1.0);
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    if (adj[id].size() == 0) continue;
    if (nodes_[id].op != OpKind::Leaf && nodes_[id].requires_grad) backprop_node(id, adj[id], adj);
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    auto& n = nodes_[id];
    if (adj[id].size() == 0) adj[id] = DenseMatrix(n.payload.rows(), n.payload.cols());
    if (n.op == OpKind::Leaf)
      accumulate(n.grad, adj[id]);
    else
      n.grad = adj[id];
  }
  return Gradients(std::move(adj));
}

void Tape::backprop_node(std::size_t id, const DenseMatrix& g,
                         std::vector<DenseMatrix>& adj) const {
  const Node& n = nodes_[id];
  auto parent = [&](std::size_t i) -> const DenseMatrix& { return nodes_[n.parents[i]].payload; };
  auto wants = [&](std::size_t i) { return nodes_[n.parents[i]].requires_grad; };
  auto push = [&](std::size_t i, const DenseMatrix& delta) {
    accumulate(adj[n.parents[i]], delta);
  };

  switch (n.op) {
    case OpKind::Leaf:
      return;
    case OpKind::MatMul:
      if (wants(0)) push(0, matmul_a_bt(g, parent(1)));
      if (wants(1)) push(1, matmul_at_b(parent(0), g));
      return;
    case OpKind::SpMM:
      if (wants(0)) push(0, spmm_at(*n.aux.sparse, g));
      return;
    case OpKind::Add:
      if (wants(0)) push(0, g);
      if (wants(1)) push(1, g);
      return;
    case OpKind::Sub:
      if (wants(0)) push(0, g);
      if (wants(1)) push(1, map(g, [](double v) { return -v; }));
      return;
    case OpKind::ElemMul:
      if (wants(0)) push(0, zip(g, parent(1), [](double a, double b) { return a * b; }));
      if (wants(1)) push(1, zip(g, parent(0), [](double a, double b) { return a * b; }));
      return;
    case OpKind::ElemDiv: {
      const auto& num = parent(0);
      const auto& den = parent(1);
      if (wants(0)) push(0, zip(g, den, [](double gv, double d) { return gv / clamp_divisor(d); }));
      if (wants(1)) {
        DenseMatrix gd(den.rows(), den.cols());
        for (std::size_t i = 0; i < den.size(); ++i) {
          const double d = den.data()[i];
          if (std::abs(d) < kDivisorFloor) continue;  // clamped: locally constant
          gd.data()[i] = -g.data()[i] * num.data()[i] / (d * d);
        }
        push(1, gd);
      }
      return;
    }
    case OpKind::Scale:
      push(0, map(g, [s = n.aux.scalar](double v) { return s * v; }));
      return;
    case OpKind::ReLU:
      push(0, zip(g, parent(0), [](double gv, double x) { return x > 0.0 ? gv : 0.0; }));
      return;
    case OpKind::RowSoftmax: {
      const auto& y = n.payload;
      DenseMatrix gx(y.rows(), y.cols());
      for (std::size_t r = 0; r < y.rows(); ++r) {
        auto yr = y.row(r);
        auto gr = g.row(r);
        double dot = 0.0;
        for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
        auto out = gx.row(r);
        for (std::size_t c = 0; c < yr.size(); ++c) out[c] = yr[c] * (gr[c] - dot);
      }
      push(0, gx);
      return;
    }
    case OpKind::LogSoftmaxCrossEntropy: {
      const auto& x = parent(0);
      DenseMatrix gx(x.rows(), x.cols());
      const double w = g(0, 0) / static_cast<double>(n.aux.rows.size());
      for (std::size_t i = 0; i < n.aux.rows.size(); ++i) {
        const std::size_t r = n.aux.rows[i];
        auto row = x.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double total = 0.0;
        for (double v : row) total += std::exp(v - mx);
        auto out = gx.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) out[c] += w * std::exp(row[c] - mx) / total;
        out[n.aux.labels[i]] -= w;
      }
      push(0, gx);
      return;
    }
    case OpKind::Trace: {
      const auto& a = parent(0);
      DenseMatrix ga(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.rows(); ++i) ga(i, i) = g(0, 0);
      push(0, ga);
      return;
    }
    case OpKind::FrobeniusNorm: {
      const double norm = n.payload(0, 0);
      if (norm == 0.0) return;
      push(0, map(parent(0), [k = g(0, 0) / norm](double x) { return k * x; }));
      return;
    }
    case OpKind::Sqrt:
      push(0, zip(g, n.payload, [](double gv, double y) {
             return gv / (2.0 * std::max(y, kDivisorFloor));
           }));
      return;
    case OpKind::Square:
      push(0, zip(g, parent(0), [](double gv, double x) { return 2.0 * x * gv; }));
      return;
    case OpKind::RowSumWeighted: {
      const auto& x = parent(0);
      const auto& w = parent(1);
      if (wants(0)) {
        DenseMatrix gx(x.rows(), x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r)
          for (std::size_t c = 0; c < x.cols(); ++c) gx(r, c) = w(r, 0) * g(0, c);
        push(0, gx);
      }
      if (wants(1)) push(1, matmul_a_bt(x, g));
      return;
    }
    case OpKind::Transpose:
      push(0, g.transposed());
      return;
    case OpKind::BroadcastRowAdd:
      if (wants(0)) push(0, g);
      if (wants(1)) {
        DenseMatrix gb(1, g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
        push(1, gb);
      }
      return;
  }
}

Value matmul(const Value& a, const Value& b) {
  const Value ps[] = {a, b};
  return a.tape().record(OpKind::MatMul, ps);
}

Value spmm(std::shared_ptr<const SparseMatrix> a, const Value& b) {
  OpAux aux;
  aux.sparse = std::move(a);
  const Value ps[] = {b};
  return b.tape().record(OpKind::SpMM, ps, std::move(aux));
}

Value add(const Value& a, const Value& b) {
  const Value ps[] = {a, b};
  return a.tape().record(OpKind::Add, ps);
}

Value sub(const Value& a, const Value& b) {
  const Value ps[] = {a, b};
  return a.tape().record(OpKind::Sub, ps);
}

Value hadamard(const Value& a, const Value& b) {
  const Value ps[] = {a, b};
  return a.tape().record(OpKind::ElemMul, ps);
}

Value divide(const Value& a, const Value& b) {
  const Value ps[] = {a, b};
  return a.tape().record(OpKind::ElemDiv, ps);
}

Value scale(const Value& a, double factor) {
  OpAux aux;
  aux.scalar = factor;
  const Value ps[] = {a};
  return a.tape().record(OpKind::Scale, ps, std::move(aux));
}

Value relu(const Value& a) {
  const Value ps[] = {a};
  return a.tape().record(OpKind::ReLU, ps);
}

Value row_softmax(const Value& a) {
  const Value ps[] = {a};
  return a.tape().record(OpKind::RowSoftmax, ps);
}

Value softmax_cross_entropy(const Value& logits, std::vector<std::size_t> rows,
                            std::vector<std::size_t> labels) {
  OpAux aux;
  aux.rows = std::move(rows);
  aux.labels = std::move(labels);
  const Value ps[] = {logits};
  return logits.tape().record(OpKind::LogSoftmaxCrossEntropy, ps, std::move(aux));
}

Value trace(const Value& a) {
  const Value ps[] = {a};
  return a.tape().record(OpKind::Trace, ps);
}

Value frobenius_norm(const Value& a) {
  const Value ps[] = {a};
  return a.tape().record(OpKind::FrobeniusNorm, ps);
}

Value sqrt(const Value& a) {
  const Value ps[] = {a};
  return a.tape().record(OpKind::Sqrt, ps);
}

Value square(const Value& a) {
  const Value ps[] = {a};
  return a.tape().record(OpKind::Square, ps);
}

Value row_sum_weighted(const Value& x, const Value& w) {
  const Value ps[] = {x, w};
  return x.tape().record(OpKind::RowSumWeighted, ps);
}

Value transpose(const Value& a) {
  const Value ps[] = {a};
  return a.tape().record(OpKind::Transpose, ps);
}

Value broadcast_row_add(const Value& x, const Value& row) {
  const Value ps[] = {x, row};
  return x.tape().record(OpKind::BroadcastRowAdd, ps);
}

Value weighted_sum(const Value& y, const DenseMatrix& weights) {
  if (weights.shape() != y.shape()) shape_error(OpKind::Trace, y.shape(), weights.shape());
  Value w = y.tape().constant(weights);
  return trace(matmul(transpose(w), y));
}

Value sum(const Value& y) {
  return weighted_sum(y, DenseMatrix(y.shape().rows, y.shape().cols, 1.0));
}

Value broadcast_scalar(const Value& s, std::size_t rows, std::size_t cols) {
  if (s.shape() != Shape{1, 1}) shape_error(OpKind::MatMul, s.shape(), "is not 1x1");
  Tape& t = s.tape();
  Value left = t.constant(DenseMatrix(rows, 1, 1.0));
  Value right = t.constant(DenseMatrix(1, cols, 1.0));
  return matmul(matmul(left, s), right);
}

GradCheckReport grad_check(const ScalarFn& f, std::span<const DenseMatrix> point, double eps,
                           double tol) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw ValidationError("grad_check: eps must lie in (0, 1e-2]");

  auto evaluate = [&](std::span<const DenseMatrix> at) {
    Tape tape;
    std::vector<Value> leaves;
    for (const auto& m : at) leaves.push_back(tape.leaf(m));
    Value out = f(tape, leaves);
    if (out.shape() != Shape{1, 1})
      throw ShapeError("grad_check: function must return 1x1, got " + out.shape().str());
    return out.payload()(0, 0);
  };

  std::vector<DenseMatrix> analytic;
  {
    Tape tape;
    std::vector<Value> leaves;
    for (const auto& m : point) leaves.push_back(tape.leaf(m));
    Value out = f(tape, leaves);
    Gradients grads = tape.backward(out);
    for (const auto& l : leaves) analytic.push_back(grads[l]);
  }

  GradCheckReport report;
  std::vector<DenseMatrix> probe(point.begin(), point.end());
  for (std::size_t li = 0; li < probe.size(); ++li) {
    auto& errs = report.rel_errors.emplace_back();
    auto& verdicts = report.entry_passed.emplace_back();
    auto values = probe[li].data();
    for (std::size_t e = 0; e < values.size(); ++e) {
      const double orig = values[e];
      values[e] = orig + eps;
      const double up = evaluate(probe);
      values[e] = orig - eps;
      const double down = evaluate(probe);
      values[e] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double exact = analytic[li].data()[e];
      const double diff = std::abs(numeric - exact);
      double rel = 0.0;
      if (diff > kGradCheckAbsFloor) rel = diff / std::max(std::abs(numeric), std::abs(exact));
      errs.push_back(rel);
      verdicts.push_back(rel <= tol);
      report.max_rel_error = std::max(report.max_rel_error, rel);
      report.passed = report.passed && rel <= tol;
      ++report.entries_checked;
    }
  }
  return report;
}

}  // namespace cit::ad
