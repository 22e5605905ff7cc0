#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "cit/cithead.hpp"
#include "cit/errors.hpp"
#include "cit/graph.hpp"
#include "support/oracles.hpp"

using namespace cit;

namespace {

using Edges = std::vector<std::pair<std::size_t, std::size_t>>;

const Edges kTwoTriangles{{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}};

DenseMatrix one_hot(const std::vector<std::size_t>& cluster, std::size_t m) {
  DenseMatrix s(cluster.size(), m);
  for (std::size_t i = 0; i < cluster.size(); ++i) s(i, cluster[i]) = 1.0;
  return s;
}

double mincut_of(const DenseMatrix& s, std::size_t n, const Edges& edges) {
  ad::Tape t;
  return mincut_loss(t.leaf(s), normalize_adjacency(adjacency_from_edges(n, edges))).payload()(0, 0);
}

double ortho_of(const DenseMatrix& s) {
  ad::Tape t;
  return ortho_loss(t.leaf(s)).payload()(0, 0);
}

// −Σ_ij Ã_ij ⟨s_i, s_j⟩ / Σ_i d̃_i ‖s_i‖², written out over node pairs.
double mincut_reference(const DenseMatrix& s, std::size_t n, const Edges& edges) {
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) a[i][i] = 1.0;
  for (auto [i, j] : edges) a[i][j] = a[j][i] = 1.0;
  auto dot = [&](std::size_t i, std::size_t j) {
    double v = 0;
    for (std::size_t k = 0; k < s.cols(); ++k) v += s(i, k) * s(j, k);
    return v;
  };
  double num = 0, den = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double degree = 0;
    for (std::size_t j = 0; j < n; ++j) {
      num += a[i][j] * dot(i, j);
      degree += a[i][j];
    }
    den += degree * dot(i, i);
  }
  return -num / den;
}

double ortho_reference(const DenseMatrix& s) {
  const std::size_t m = s.cols();
  std::vector<double> gram(m * m, 0.0);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b)
      for (std::size_t i = 0; i < s.rows(); ++i) gram[a * m + b] += s(i, a) * s(i, b);
  double norm = 0;
  for (double g : gram) norm += g * g;
  norm = std::sqrt(norm);
  double out = 0;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      const double target = a == b ? 1.0 / std::sqrt(static_cast<double>(m)) : 0.0;
      out += std::pow(gram[a * m + b] / norm - target, 2);
    }
  return std::sqrt(out);
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// 1-D toy: cluster 0 holds {-1, 1} (center 0, std 1), cluster 1 holds
// {8, 12} (center 10, std 2).
struct Toy {
  DenseMatrix z = DenseMatrix::from_rows({{-1}, {1}, {8}, {12}});
  DenseMatrix s = one_hot({0, 0, 1, 1}, 2);
};

}  // namespace

TEST_CASE("cluster assignment is a row softmax") {
  ad::Tape t;
  const auto z = t.constant(DenseMatrix::from_rows({{1, 2}, {-3, 0.5}, {0, 0}}));
  SUBCASE("zero head gives uniform rows") {
    const ClusterHeadParams head{DenseMatrix(2, 4), DenseMatrix(1, 4)};
    const DenseMatrix s = assign_clusters(z, bind(t, head)).payload();
    for (double v : s.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("a large bias saturates onto cluster 0") {
    const ClusterHeadParams head{DenseMatrix(2, 3), DenseMatrix::from_rows({{10, -10, -10}})};
    const DenseMatrix s = assign_clusters(z, bind(t, head)).payload();
    for (std::size_t i = 0; i < 3; ++i) CHECK(s(i, 0) > 0.9999);
  }
  SUBCASE("rows sum to one") {
    const ClusterHeadParams head = init_cluster_head(2, 5, 3);
    const DenseMatrix s = assign_clusters(z, bind(t, head)).payload();
    for (std::size_t i = 0; i < 3; ++i) {
      double total = 0;
      for (double v : s.row(i)) total += v;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(init_cluster_head(4, 1, 0), ValidationError);
}

TEST_CASE("mincut loss worked cases") {
  CHECK(mincut_of(one_hot({0, 0, 0, 1, 1, 1}, 2), 6, kTwoTriangles) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(mincut_of(one_hot({0, 0, 0, 0, 0, 0}, 2), 6, kTwoTriangles) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(mincut_of(one_hot({0, 1}, 2), 2, {{0, 1}}) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK_THROWS_AS(mincut_of(one_hot({0, 1}, 2), 3, {{0, 1}}), ShapeError);
}

TEST_CASE("orthogonality loss worked cases") {
  CHECK(ortho_of(one_hot({0, 0, 1, 1}, 2)) == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
  CHECK(ortho_of(one_hot({0, 0, 0, 0}, 2)) == doctest::Approx(std::sqrt(2.0 - std::sqrt(2.0))).epsilon(1e-14));
  CHECK_THROWS_AS(ortho_of(DenseMatrix(3, 2)), ValidationError);
}

TEST_CASE("clustering objective combines the two losses") {
  ad::Tape t;
  const auto adj = normalize_adjacency(adjacency_from_edges(6, kTwoTriangles));
  const auto balanced = t.leaf(one_hot({0, 0, 0, 1, 1, 1}, 2));
  CHECK(clustering_objective(balanced, adj, 0.0).payload()(0, 0) == mincut_loss(balanced, adj).payload()(0, 0));
  CHECK(clustering_objective(balanced, adj, 1.0).payload()(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  const auto collapsed = t.leaf(one_hot({0, 0, 0, 0, 0, 0}, 2));
  CHECK(clustering_objective(collapsed, adj, 1.0).payload()(0, 0) ==
        doctest::Approx(-1.0 + std::sqrt(2.0 - std::sqrt(2.0))).epsilon(1e-12));
  CHECK(clustering_objective(collapsed, adj, 1.0).payload()(0, 0) == doctest::Approx(-0.2346).epsilon(1e-4));
  CHECK_THROWS_AS(clustering_objective(collapsed, adj, -1.0), ValidationError);
}

TEST_CASE("losses agree with pairwise references and stay in range") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> size(2, 30), clusters(2, 6);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = size(rng), m = clusters(rng);
    const Edges edges = oracle::random_edges(n, 0.2, rng);
    const DenseMatrix s = oracle::random_stochastic(n, m, rng);
    const double mc = mincut_of(s, n, edges), oc = ortho_of(s);
    CHECK(mc == doctest::Approx(mincut_reference(s, n, edges)).epsilon(1e-12));
    CHECK(oc == doctest::Approx(ortho_reference(s)).epsilon(1e-12));
    CHECK(mc >= -1.0 - 1e-12);
    CHECK(mc <= 0.0);
    CHECK(oc >= 0.0);
    CHECK(oc < std::sqrt(2.0));
  }
}

TEST_CASE("cluster statistics") {
  ad::Tape t;
  SUBCASE("two nodes per cluster") {
    const auto z = t.leaf(DenseMatrix::from_rows({{0, 0}, {2, 2}, {5, 5}, {7, 9}}));
    const auto st = cluster_stats(t.leaf(one_hot({0, 0, 1, 1}, 2)), z);
    CHECK(st.centers.payload()(0, 0) == 1.0);
    CHECK(st.centers.payload()(0, 1) == 1.0);
    CHECK(st.stds.payload()(0, 0) == 1.0);
    CHECK(st.stds.payload()(0, 1) == 1.0);
    CHECK(st.centers.payload()(1, 1) == 7.0);
    CHECK(st.stds.payload()(1, 1) == 2.0);
    CHECK(st.masses == std::vector<double>{2.0, 2.0});
  }
  SUBCASE("identical features") {
    const auto z = t.leaf(DenseMatrix(5, 3, 1.5));
    std::mt19937_64 rng(1);
    const auto st = cluster_stats(t.leaf(oracle::random_stochastic(5, 3, rng)), z);
    for (std::size_t k = 0; k < 3; ++k) {
      if (st.empty[k]) continue;
      for (std::size_t d = 0; d < 3; ++d) {
        CHECK(st.centers.payload()(k, d) == doctest::Approx(1.5).epsilon(1e-14));
        CHECK(st.stds.payload()(k, d) == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
      }
    }
  }
  SUBCASE("uniform assignment centers every cluster on the global mean") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal;
    DenseMatrix zv(7, 2);
    for (double& v : zv.data()) v = normal(rng);
    const auto st = cluster_stats(t.leaf(DenseMatrix(7, 3, 1.0 / 3.0)), t.leaf(zv));
    for (std::size_t d = 0; d < 2; ++d) {
      double mean = 0;
      for (std::size_t i = 0; i < 7; ++i) mean += zv(i, d) / 7.0;
      for (std::size_t k = 0; k < 3; ++k) CHECK(st.centers.payload()(k, d) == doctest::Approx(mean).epsilon(1e-13));
    }
  }
  SUBCASE("empty clusters get center 0 and std 1") {
    const auto st = cluster_stats(t.leaf(one_hot({0, 0, 2}, 3)), t.leaf(DenseMatrix::from_rows({{1}, {3}, {4}})));
    CHECK(st.empty == std::vector<bool>{false, true, false});
    CHECK(st.nonempty() == 2);
    CHECK(st.centers.payload()(1, 0) == 0.0);
    CHECK(st.stds.payload()(1, 0) == 1.0);
  }
}

TEST_CASE("Gaussian spread of the cluster statistics") {
  ad::Tape t;
  SUBCASE("identical centers") {
    const auto st = cluster_stats(t.leaf(one_hot({0, 1, 0, 1}, 2)), t.leaf(DenseMatrix::from_rows({{1}, {1}, {3}, {3}})));
    CHECK(gaussian_stats(st).sigma_mu(0, 0) == 0.0);
  }
  SUBCASE("centers 0 and 2 with unit spreads") {
    const auto st = cluster_stats(t.leaf(one_hot({0, 0, 1, 1}, 2)), t.leaf(DenseMatrix::from_rows({{-1}, {1}, {1}, {3}})));
    const auto g = gaussian_stats(st);
    CHECK(g.sigma_mu(0, 0) == 1.0);
    CHECK(g.sigma_sigma(0, 0) == 0.0);
    CHECK(st.noise_mu == g.sigma_mu);
  }
  SUBCASE("spreads 0, 1, 2") {
    const auto st = cluster_stats(t.leaf(one_hot({0, 0, 1, 1, 2, 2}, 3)),
                                  t.leaf(DenseMatrix::from_rows({{0}, {0}, {0}, {2}, {-1}, {3}})));
    CHECK(gaussian_stats(st).sigma_sigma(0, 0) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-14));
    CHECK(gaussian_stats(st).sigma_sigma(0, 0) == doctest::Approx(0.8165).epsilon(1e-4));
    // Spread of the variances {0, 1, 4} instead.
    CHECK(gaussian_stats(st, true).sigma_sigma(0, 0) == doctest::Approx(std::sqrt(78.0 / 27.0)).epsilon(1e-14));
  }
  SUBCASE("one nonempty cluster") {
    const auto st = cluster_stats(t.leaf(one_hot({0, 0}, 2)), t.leaf(DenseMatrix::from_rows({{1}, {2}})));
    CHECK_THROWS_AS(gaussian_stats(st), ValidationError);
    CHECK(st.noise_mu == DenseMatrix(1, 1));
  }
}

TEST_CASE("transfer worked examples, noise off") {
  Toy toy;
  ad::Tape t;
  const auto z = t.leaf(toy.z);
  const auto st = cluster_stats(t.leaf(toy.s), z);

  SUBCASE("1-D example lands on 12") {
    const auto out = transfer_nodes(z, st, {{1}, {1}}).payload();
    CHECK(out(1, 0) == 12.0);
  }
  SUBCASE("a node at its own center lands on the target center") {
    Toy centered;
    centered.z = DenseMatrix::from_rows({{-1}, {1}, {0}, {8}, {12}});
    centered.s = one_hot({0, 0, 0, 1, 1}, 2);
    ad::Tape t2;
    const auto z2 = t2.leaf(centered.z);
    const auto st2 = cluster_stats(t2.leaf(centered.s), z2);
    REQUIRE(st2.centers.payload()(0, 0) == 0.0);
    CHECK(transfer_nodes(z2, st2, {{2}, {1}}).payload()(2, 0) == 10.0);
  }
  SUBCASE("moving within the same cluster is the identity") {
    TransferOptions opts;
    opts.allow_same_cluster = true;
    const auto out = transfer_nodes(z, st, {{0, 1, 2, 3}, {0, 0, 1, 1}}, opts).payload();
    CHECK(out == toy.z);
  }
  SUBCASE("untouched rows are bit-identical") {
    const auto out = transfer_nodes(z, st, {{1}, {1}}).payload();
    for (std::size_t r : {0u, 2u, 3u}) CHECK(same_bits(out.row(r), toy.z.row(r)));
  }
  SUBCASE("empty plan returns Z itself") {
    CHECK(transfer_nodes(z, st, {}).id() == z.id());
  }
}

TEST_CASE("transfer preserves the standardized residual") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 24, h = 5, m = 3;
    DenseMatrix zv(n, h);
    for (double& v : zv.data()) v = normal(rng);
    const DenseMatrix sv = oracle::random_stochastic(n, m, rng);
    ad::Tape t;
    const auto z = t.leaf(zv);
    const auto st = cluster_stats(t.leaf(sv), z);
    if (st.nonempty() < 2) continue;
    std::vector<std::size_t> cand(n);
    std::iota(cand.begin(), cand.end(), 0);
    const TransferPlan plan = sample_transfer_plan(sv, cand, 0.5, trial);
    const DenseMatrix out = transfer_nodes(z, st, plan).payload();
    const auto src = hard_assignments(sv);
    const DenseMatrix& c = st.centers.payload();
    const DenseMatrix& s = st.stds.payload();
    std::set<std::size_t> moved(plan.nodes.begin(), plan.nodes.end());
    for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
      const std::size_t node = plan.nodes[i], j = plan.targets[i], k = src[node];
      for (std::size_t d = 0; d < h; ++d) {
        const double before = (zv(node, d) - c(k, d)) / s(k, d);
        const double after = (out(node, d) - c(j, d)) / s(j, d);
        CHECK(after == doctest::Approx(before).epsilon(1e-10));
      }
    }
    for (std::size_t r = 0; r < n; ++r)
      if (!moved.count(r)) CHECK(same_bits(out.row(r), zv.row(r)));
  }
}

TEST_CASE("noisy transfer perturbs the target statistics") {
  // Three 1-D clusters: centers 0, 10, 20 and stds 1, 2, 3.
  const DenseMatrix zv = DenseMatrix::from_rows({{-1}, {1}, {8}, {12}, {17}, {23}});
  const DenseMatrix sv = one_hot({0, 0, 1, 1, 2, 2}, 3);
  ad::Tape t;
  const auto z = t.leaf(zv);
  const auto st = cluster_stats(t.leaf(sv), z);
  const double sigma_mu = st.noise_mu(0, 0), sigma_sigma = st.noise_sigma(0, 0);
  CHECK(sigma_mu == doctest::Approx(std::sqrt(200.0 / 3.0)).epsilon(1e-14));
  CHECK(sigma_sigma == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-14));

  TransferOptions opts;
  opts.noise = true;
  opts.eps_mu = DenseMatrix::from_rows({{0.5}});
  opts.eps_sigma = DenseMatrix::from_rows({{-0.25}});
  const double got = transfer_nodes(z, st, {{1}, {2}}, opts).payload()(1, 0);
  CHECK(got == doctest::Approx((3.0 - 0.25 * sigma_sigma) * 1.0 + 20.0 + 0.5 * sigma_mu).epsilon(1e-14));

  SUBCASE("zero draws reduce to the noiseless map") {
    opts.eps_mu = DenseMatrix(1, 1);
    opts.eps_sigma = DenseMatrix(1, 1);
    CHECK(transfer_nodes(z, st, {{1}, {2}}, opts).payload()(1, 0) == 23.0);
  }
  SUBCASE("drawn noise is seeded") {
    opts.eps_mu.reset();
    opts.eps_sigma.reset();
    opts.seed = 5;
    const double a = transfer_nodes(z, st, {{1}, {2}}, opts).payload()(1, 0);
    const double b = transfer_nodes(z, st, {{1}, {2}}, opts).payload()(1, 0);
    CHECK(a == b);
    CHECK(a != 23.0);
  }
  SUBCASE("supplied draws must match the plan") {
    opts.eps_mu = DenseMatrix(2, 1);
    CHECK_THROWS_AS(transfer_nodes(z, st, {{1}, {2}}, opts), ShapeError);
  }
}

TEST_CASE("scalar noise shares one draw across dimensions") {
  const DenseMatrix zv = DenseMatrix::from_rows({{-1, 0}, {1, 4}, {8, 1}, {12, 3}});
  ad::Tape t;
  const auto z = t.leaf(zv);
  const auto st = cluster_stats(t.leaf(one_hot({0, 0, 1, 1}, 2)), z);
  TransferOptions opts;
  opts.noise = true;
  opts.scalar_noise = true;
  opts.eps_mu = DenseMatrix::from_rows({{1.0}});
  opts.eps_sigma = DenseMatrix::from_rows({{0.0}});
  const DenseMatrix out = transfer_nodes(z, st, {{1}, {1}}, opts).payload();
  // Σ_μ = (5, 0): only the first dimension moves by the draw.
  CHECK(out(1, 0) == doctest::Approx(12.0 + 5.0).epsilon(1e-14));
  CHECK(out(1, 1) == doctest::Approx(3.0).epsilon(1e-14));
  opts.eps_mu = DenseMatrix(1, 2);
  CHECK_THROWS_AS(transfer_nodes(z, st, {{1}, {1}}, opts), ShapeError);
}

TEST_CASE("transfer rejects invalid plans") {
  ad::Tape t;
  const auto z = t.leaf(DenseMatrix::from_rows({{0}, {1}, {5}}));
  const auto st = cluster_stats(t.leaf(one_hot({0, 0, 2}, 3)), z);
  CHECK_THROWS_AS(transfer_nodes(z, st, {{0}, {0}}), ValidationError);      // own cluster
  CHECK_THROWS_AS(transfer_nodes(z, st, {{0}, {1}}), ValidationError);      // empty target
  CHECK_THROWS_AS(transfer_nodes(z, st, {{0}, {3}}), ValidationError);      // no such cluster
  CHECK_THROWS_AS(transfer_nodes(z, st, {{7}, {2}}), ValidationError);      // no such node
  CHECK_THROWS_AS(transfer_nodes(z, st, {{0, 0}, {2, 2}}), ValidationError);  // listed twice
  CHECK_THROWS_AS(transfer_nodes(z, st, {{0, 1}, {2}}), ValidationError);   // ragged
}

TEST_CASE("transfer plans") {
  const DenseMatrix s = one_hot({0, 1, 0, 1, 0, 1, 0, 1, 0, 1}, 2);
  std::vector<std::size_t> cand(10);
  std::iota(cand.begin(), cand.end(), 0);

  CHECK(sample_transfer_plan(s, cand, 0.0, 1).empty());

  const TransferPlan all = sample_transfer_plan(s, cand, 1.0, 1);
  CHECK(std::set<std::size_t>(all.nodes.begin(), all.nodes.end()).size() == 10);
  for (std::size_t i = 0; i < all.nodes.size(); ++i) CHECK(all.targets[i] == 1 - all.nodes[i] % 2);

  const TransferPlan a = sample_transfer_plan(s, cand, 0.35, 4), b = sample_transfer_plan(s, cand, 0.35, 4);
  CHECK(a.nodes.size() == 3);
  CHECK(a.nodes == b.nodes);
  CHECK(a.targets == b.targets);

  const std::vector<std::size_t> subset{2, 5, 7};
  for (std::size_t node : sample_transfer_plan(s, subset, 1.0, 2).nodes)
    CHECK(std::find(subset.begin(), subset.end(), node) != subset.end());

  CHECK_THROWS_AS(sample_transfer_plan(one_hot({0, 0, 0}, 2), std::vector<std::size_t>{0, 1, 2}, 1.0, 1),
                  ValidationError);
  CHECK_THROWS_AS(sample_transfer_plan(s, cand, 1.5, 1), ValidationError);
}

TEST_CASE("plan targets avoid the source and empty clusters") {
  const DenseMatrix s = one_hot({0, 1, 3, 0, 1, 3, 0, 1, 3, 0, 1, 3}, 4);
  std::vector<std::size_t> cand(12);
  std::iota(cand.begin(), cand.end(), 0);
  const auto src = hard_assignments(s);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TransferPlan plan = sample_transfer_plan(s, cand, 0.5, seed);
    REQUIRE(plan.nodes.size() == 6);
    for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
      CHECK(plan.targets[i] != src[plan.nodes[i]]);
      CHECK(plan.targets[i] != 2);
    }
  }
}
