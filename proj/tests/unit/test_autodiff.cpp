#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "cit/autodiff.hpp"
#include "cit/backbone.hpp"
#include "cit/cithead.hpp"
#include "cit/errors.hpp"
#include "cit/gradsuite.hpp"
#include "cit/graph.hpp"
#include "support/oracles.hpp"

using namespace cit;

namespace {

std::shared_ptr<const SparseMatrix> sparse_identity(std::size_t n) {
  return std::make_shared<const SparseMatrix>(SparseMatrix::identity(n));
}

// Two triangles {0,1,2} and {3,4,5} joined by nothing.
SparseMatrix two_triangles() {
  return adjacency_from_edges(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
}

DenseMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix m(r, c);
  for (double& v : m.data()) v = normal(rng);
  return m;
}

}  // namespace

TEST_CASE("record evaluates the forward rule eagerly") {
  ad::Tape t;
  auto ones = t.leaf(DenseMatrix(2, 2, 1.0));
  auto other = t.leaf(DenseMatrix(2, 2, 1.0));
  const ad::Value ps[] = {ones, other};
  CHECK(t.record(ad::OpKind::Add, ps).payload() == DenseMatrix(2, 2, 2.0));

  auto x = t.leaf(DenseMatrix::from_rows({{-1, 3}}));
  const ad::Value one[] = {x};
  CHECK(t.record(ad::OpKind::ReLU, one).payload() == DenseMatrix::from_rows({{0, 3}}));

  auto dense = t.leaf(DenseMatrix::from_rows({{5, 6}, {7, 8}}));
  CHECK(ad::spmm(sparse_identity(2), dense).payload() == DenseMatrix::from_rows({{5, 6}, {7, 8}}));
}

TEST_CASE("record rejects incompatible shapes") {
  ad::Tape t;
  auto a = t.leaf(DenseMatrix(2, 3));
  auto b = t.leaf(DenseMatrix(2, 3));
  CHECK_THROWS_AS(ad::matmul(a, b), ShapeError);
  CHECK_THROWS_AS(ad::add(a, t.leaf(DenseMatrix(3, 2))), ShapeError);
  CHECK_THROWS_AS(ad::trace(a), ShapeError);
}

TEST_CASE("non-finite forward results raise NumericalError") {
  ad::Tape t;
  auto x = t.leaf(DenseMatrix::from_rows({{-1.0}}));
  CHECK_THROWS_AS(ad::sqrt(x), NumericalError);
}

TEST_CASE("trace gradient is the identity") {
  ad::Tape t;
  auto w = t.leaf(DenseMatrix::from_rows({{1, 2}, {3, 4}}));
  auto g = t.backward(ad::trace(w));
  CHECK(g[w] == DenseMatrix::identity(2));
}

TEST_CASE("Frobenius norm gradient is W / ||W||") {
  ad::Tape t;
  auto w = t.leaf(DenseMatrix::from_rows({{3, 4}}));
  auto g = t.backward(ad::frobenius_norm(w));
  CHECK(g[w](0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(g[w](0, 1) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("backward requires a 1x1 loss") {
  ad::Tape t;
  auto w = t.leaf(DenseMatrix(2, 2, 1.0));
  CHECK_THROWS_AS(t.backward(w), ShapeError);
}

TEST_CASE("leaf gradients accumulate until zero_grad") {
  ad::Tape t;
  auto w = t.leaf(DenseMatrix::from_rows({{1, 2}, {3, 4}}));
  auto loss = ad::trace(w);
  t.backward(loss);
  t.backward(loss);
  CHECK(w.grad()(0, 0) == 2.0);
  t.zero_grad();
  CHECK(w.grad()(0, 0) == 0.0);
}

TEST_CASE("constants receive no gradient") {
  ad::Tape t;
  auto c = t.constant(DenseMatrix::identity(2));
  auto w = t.leaf(DenseMatrix::identity(2));
  auto g = t.backward(ad::trace(ad::matmul(c, w)));
  CHECK(g[c] == DenseMatrix(2, 2, 0.0));
  CHECK(g[w] == DenseMatrix::identity(2));
}

TEST_CASE("ElemDiv clamps tiny divisors and keeps their sign") {
  ad::Tape t;
  auto x = t.leaf(DenseMatrix::from_rows({{1.0, 1.0, 2.0}}));
  auto d = t.leaf(DenseMatrix::from_rows({{0.0, -1e-20, 4.0}}));
  auto q = ad::divide(x, d).payload();
  CHECK(q(0, 0) == 1.0 / ad::kDivisorFloor);
  CHECK(q(0, 1) == -1.0 / ad::kDivisorFloor);
  CHECK(q(0, 2) == 0.5);
}

TEST_CASE("grad_check on sum of squares") {
  ad::ScalarFn f = [](ad::Tape&, std::span<const ad::Value> v) { return ad::sum(ad::square(v[0])); };
  const DenseMatrix point[] = {DenseMatrix::from_rows({{1, 2}})};
  const auto report = ad::grad_check(f, point, 1e-5, 1e-4);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-6);
  CHECK(report.entries_checked == 2);
}

TEST_CASE("grad_check on a constant function passes with zero gradient") {
  ad::ScalarFn f = [](ad::Tape& t, std::span<const ad::Value>) { return t.constant(DenseMatrix(1, 1, 3.0)); };
  const DenseMatrix point[] = {DenseMatrix::from_rows({{1, 2, 3}})};
  const auto report = ad::grad_check(f, point);
  CHECK(report.passed);
  CHECK(report.max_rel_error == 0.0);
}

TEST_CASE("grad_check on the orthogonality loss at a positive 6x2 S") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.1, 1.0);
  DenseMatrix s(6, 2);
  for (double& v : s.data()) v = unit(rng);
  ad::ScalarFn f = [](ad::Tape&, std::span<const ad::Value> v) { return ortho_loss(v[0]); };
  const DenseMatrix point[] = {s};
  CHECK(ad::grad_check(f, point, 1e-5, 1e-4).passed);
}

TEST_CASE("grad_check catches a wrong gradient") {
  // x²·stop_grad(x): the value is x³ but the tape differentiates only x².
  ad::ScalarFn f = [](ad::Tape& t, std::span<const ad::Value> v) {
    const ad::Value frozen = t.constant(v[0].payload());
    return ad::sum(ad::hadamard(ad::square(v[0]), frozen));
  };
  const DenseMatrix point[] = {DenseMatrix::from_rows({{1.0, 2.0}})};
  const auto report = ad::grad_check(f, point);
  CHECK_FALSE(report.passed);
  CHECK(report.max_rel_error > 0.2);
}

TEST_CASE("grad_check rejects out-of-range step sizes") {
  ad::ScalarFn f = [](ad::Tape&, std::span<const ad::Value> v) { return ad::sum(v[0]); };
  const DenseMatrix point[] = {DenseMatrix(1, 1, 1.0)};
  CHECK_THROWS_AS(ad::grad_check(f, point, 0.0), ValidationError);
  CHECK_THROWS_AS(ad::grad_check(f, point, 0.1), ValidationError);
}

TEST_CASE("GCN loss on the two-triangle graph matches finite differences") {
  const NormalizedAdjacency adj = normalize_adjacency(two_triangles());
  std::mt19937_64 rng(5);
  const DenseMatrix x = random_matrix(6, 3, rng);
  const DenseMatrix point[] = {random_matrix(3, 4, rng), random_matrix(4, 2, rng)};
  ad::ScalarFn f = [&](ad::Tape& t, std::span<const ad::Value> v) {
    const ad::Value h = ad::relu(ad::spmm(adj.matrix, ad::matmul(t.constant(x), v[0])));
    const ad::Value logits = ad::spmm(adj.matrix, ad::matmul(h, v[1]));
    return ad::softmax_cross_entropy(logits, {0, 1, 3}, {0, 0, 1});
  };
  const auto report = ad::grad_check(f, point, 1e-5, 1e-4);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("every op passes its finite-difference check") {
  const auto suite = run_gradient_suite(3);
  std::size_t ops = 0;
  for (const auto& e : suite) {
    CAPTURE(e.name);
    CHECK(e.report.passed);
    CHECK(e.report.entries_checked > 0);
    ops += e.tolerance == 1e-4;
  }
  CHECK(ops == std::size(ad::kAllOps));
}

TEST_CASE("softmax cross entropy matches the direct formula") {
  ad::Tape t;
  auto logits = t.leaf(DenseMatrix::from_rows({{1.0, 2.0, 0.5}, {0.0, 0.0, 3.0}}));
  const double got = ad::softmax_cross_entropy(logits, {0, 1}, {1, 2}).payload()(0, 0);
  auto nll = [](double a, double b, double c, double pick) {
    return -(pick - std::log(std::exp(a) + std::exp(b) + std::exp(c)));
  };
  const double want = 0.5 * (nll(1.0, 2.0, 0.5, 2.0) + nll(0.0, 0.0, 3.0, 3.0));
  CHECK(got == doctest::Approx(want).epsilon(1e-14));
}
