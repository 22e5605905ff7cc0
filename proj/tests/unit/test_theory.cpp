#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "cit/errors.hpp"
#include "cit/theory.hpp"
#include "support/oracles.hpp"

using namespace cit;

namespace {

FisherWorld with_means(FisherWorld w, double mu_D, double mu_R, double s_D = 1.0, double s_R = 1.0) {
  w.mu_D = {mu_D};
  w.mu_R = {mu_R};
  w.sigma_D = {s_D};
  w.sigma_R = {s_R};
  return w;
}

}  // namespace

TEST_CASE("covariance vanishes for zero means") {
  const FisherWorld w = with_means(world_from_counts(30, 70, 55, 45), 0.0, 0.0);
  CHECK(fisher_stats(w).cov[0] == 0.0);
}

TEST_CASE("covariance vanishes when labels are balanced in both clusters") {
  const FisherWorld w = with_means(world_from_counts(100, 100, 100, 100), 1.3, 1.3);
  CHECK(fisher_stats(w).cov[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("variance is the two-cluster mixture variance") {
  const FisherWorld w = with_means(world_from_counts(10, 30, 20, 40), 2.0, -1.0, 0.5, 1.5);
  const double pD = 0.4, pR = 0.6, mean = pD * 2.0 + pR * -1.0;
  const double expected = pD * (0.25 + 4.0) + pR * (2.25 + 1.0) - mean * mean;
  CHECK(fisher_stats(w).var[0] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("a zero label-given-cluster probability is a numerical failure") {
  const FisherWorld w = with_means(world_from_counts(0, 10, 5, 5), 1.0, 1.0);
  CHECK_THROWS_AS(fisher_stats(w), NumericalError);
}

TEST_CASE("world construction checks") {
  CHECK_THROWS_AS(world_from_counts(0, 0, 3, 4), ValidationError);
  CHECK_THROWS_AS(consistent_world(5, 5, 5, 5, {1.0, 2.0}, {1.0}, {1.0, 1.0}), ValidationError);
  CHECK_THROWS_AS(random_world(0, 1), ValidationError);

  FisherWorld bad = with_means(world_from_counts(5, 5, 5, 5), 1.0, 1.0);
  bad.pi_D = 0.7;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("random worlds satisfy the spurious-correlation condition") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const FisherWorld w = random_world(3, seed);
    CHECK_NOTHROW(w.validate());
    for (double n : {w.n_D0, w.n_D1, w.n_R0, w.n_R1}) {
      CHECK(n >= 20);
      CHECK(n <= 500);
    }
    for (double r : consistency_residual(w)) CHECK(std::fabs(r) < 1e-12);
  }
  const FisherWorld a = random_world(2, 7), b = random_world(2, 7);
  CHECK(a.mu_D == b.mu_D);
  CHECK(a.sigma_R == b.sigma_R);
}

TEST_CASE("Gaussian cells reproduce the world's moments") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FisherWorld w = random_world(2, seed);
    const CellModel c = cell_model(w);
    const auto mu0 = class_mean(w, 0), mu1 = class_mean(w, 1);
    for (std::size_t d = 0; d < 2; ++d) {
      CHECK(w.pi_0gD * c.mean_D0[d] + w.pi_1gD * c.mean_D1[d] == doctest::Approx(w.mu_D[d]).epsilon(1e-12));
      CHECK(w.pi_0gR * c.mean_R0[d] + w.pi_1gR * c.mean_R1[d] == doctest::Approx(w.mu_R[d]).epsilon(1e-12));
      const double gap_D = c.mean_D0[d] - c.mean_D1[d], gap_R = c.mean_R0[d] - c.mean_R1[d];
      CHECK(c.std_D[d] * c.std_D[d] + w.pi_0gD * w.pi_1gD * gap_D * gap_D ==
            doctest::Approx(w.sigma_D[d] * w.sigma_D[d]).epsilon(1e-12));
      CHECK(c.std_R[d] * c.std_R[d] + w.pi_0gR * w.pi_1gR * gap_R * gap_R ==
            doctest::Approx(w.sigma_R[d] * w.sigma_R[d]).epsilon(1e-12));
      const double cond0 = (w.pi_D * w.pi_0gD * c.mean_D0[d] + w.pi_R * w.pi_0gR * c.mean_R0[d]) / w.pi_0();
      const double cond1 = (w.pi_D * w.pi_1gD * c.mean_D1[d] + w.pi_R * w.pi_1gR * c.mean_R1[d]) / w.pi_1();
      CHECK(cond0 == doctest::Approx(mu0[d]).epsilon(1e-12));
      CHECK(cond1 == doctest::Approx(mu1[d]).epsilon(1e-12));
    }
  }
}

TEST_CASE("closed forms match a Monte-Carlo world to 1%") {
  const FisherWorld w = random_world(1, 3);
  const CellModel c = cell_model(w);
  std::mt19937_64 rng(2024);
  const auto mc = oracle::sample_fisher(w.pi_D, w.pi_1gD, w.pi_1gR, c.mean_D0[0], c.mean_D1[0], c.mean_R0[0],
                                        c.mean_R1[0], c.std_D[0], c.std_R[0], 1000000, rng);
  const FisherStats s = fisher_stats(w);
  CHECK(mc.var.value == doctest::Approx(s.var[0]).epsilon(0.01));
  CHECK(mc.cov.value == doctest::Approx(s.cov[0]).epsilon(0.01));
}

TEST_CASE("no transfer leaves the statistics unchanged") {
  const FisherWorld w = random_world(2, 11);
  const TransferReport r = theory_transfer_check(w, 0.0, {0, 0});
  for (std::size_t d = 0; d < 2; ++d) {
    CHECK(r.var_post[d] == r.pre.var[d]);
    CHECK(r.var_post_mixture[d] == r.pre.var[d]);
    CHECK(r.cov_post[d] == doctest::Approx(r.pre.cov[d]).epsilon(1e-14));
  }
  CHECK(r.pi_D_post == w.pi_D);
  CHECK(r.pi_0gD_post == w.pi_0gD);
}

TEST_CASE("full transfer leaves only the marginal label mix in the covariance") {
  const FisherWorld w = random_world(2, 12);
  const TransferReport r = theory_transfer_check(w, 1.0, {0, 0});
  CHECK(r.pi_D_post == 1.0);
  CHECK(r.pi_0gD_post == doctest::Approx(w.pi_0()).epsilon(1e-14));
  CHECK(r.skew_gap == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  for (std::size_t d = 0; d < 2; ++d) {
    // Substituting π'_{y|D} = π_y into the covariance form gives μ_D(π₀ − π₁).
    CHECK(r.cov_post[d] == doctest::Approx(w.mu_D[d] * (w.pi_0() - w.pi_1())).epsilon(1e-12));
    CHECK(r.cov_p1_claim[d] == doctest::Approx(w.mu_D[d] * (w.pi_1() - w.pi_0())).epsilon(1e-15));
    CHECK(r.d_dependence[d] == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  }
}

TEST_CASE("the p = 1 sign question is moot for balanced labels") {
  const FisherWorld w = consistent_world(120, 80, 80, 120, {0.7}, {1.0}, {1.0});
  REQUIRE(w.pi_0() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(theory_transfer_check(w, 1.0, {0, 0}).p1_claim_holds);
}

TEST_CASE("cluster-skew dependence shrinks as p grows") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FisherWorld w = random_world(2, seed);
    double prev_gap = INFINITY;
    std::vector<double> prev(2, INFINITY);
    for (double p : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0}) {
      const TransferReport r = theory_transfer_check(w, p, {0, 0});
      CHECK(r.skew_gap <= prev_gap + 1e-15);
      prev_gap = r.skew_gap;
      for (std::size_t d = 0; d < 2; ++d) {
        CHECK(r.d_dependence[d] <= prev[d] + 1e-12);
        prev[d] = r.d_dependence[d];
      }
    }
  }
}

TEST_CASE("simulated transfer matches the mixture variance") {
  const FisherWorld w = random_world(1, 5);
  for (double p : {0.3, 1.0}) {
    const TransferReport r = theory_transfer_check(w, p, {400000, 9});
    REQUIRE(r.empirical_var.size() == 1);
    CHECK(r.empirical_var[0] == doctest::Approx(r.var_post_mixture[0]).epsilon(0.02));
  }
}

TEST_CASE("transfer check input validation") {
  const FisherWorld w = random_world(1, 1);
  CHECK_THROWS_AS(theory_transfer_check(w, -0.1), ValidationError);
  FisherWorld no_counts = with_means(FisherWorld{}, 1.0, 1.0);
  CHECK_THROWS_AS(theory_transfer_check(no_counts, 0.5), ValidationError);
}
