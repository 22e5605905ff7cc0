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

// Fisher-discriminant statistics of a two-cluster, two-label world.
//
// A world has clusters D and R with per-dimension means μ_e and spreads Σ_e,
// cluster probabilities π_e and label conditionals π_{y|e}. Class means are
// tied to the clusters through μ_y = μ_D/π_{y|D} + μ_R/π_{y|R}, which makes
// Cov(Z, Y) depend on how labels are distributed inside clusters. Moving a
// fraction p of R into D (re-standardizing to D's statistics) shifts π_{y|D}
// toward the label marginals and weakens that dependence.

#ifndef CIT_THEORY_HPP
#define CIT_THEORY_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "cit/rng.hpp"

namespace cit {

struct FisherWorld {
  std::vector<double> mu_D, mu_R;        // per-dimension cluster means
  std::vector<double> sigma_D, sigma_R;  // per-dimension cluster stds
  double pi_D = 0.5, pi_R = 0.5;
  double pi_0gD = 0.5, pi_1gD = 0.5, pi_0gR = 0.5, pi_1gR = 0.5;
  double n_D = 0, n_R = 0, n_D0 = 0, n_D1 = 0, n_R0 = 0, n_R1 = 0;

  std::size_t dims() const noexcept { return mu_D.size(); }
  double pi_0() const noexcept { return pi_D * pi_0gD + pi_R * pi_0gR; }
  double pi_1() const noexcept { return 1.0 - pi_0(); }
  bool has_counts() const noexcept { return n_D + n_R > 0; }

  void validate() const;
};

/// Probabilities from the four cell counts; means and spreads are left for
/// the caller to fill in.
FisherWorld world_from_counts(double n_D0, double n_D1, double n_R0, double n_R1);

/// μ_y = μ_D/π_{y|D} + μ_R/π_{y|R}, per dimension.
std::vector<double> class_mean(const FisherWorld& w, int label);

struct FisherStats {
  std::vector<double> var;  // Var(Z)
  std::vector<double> cov;  // Cov(Z, Y)
};

/// Var(Z) = (Σ_D²+μ_D²)π_D + (Σ_R²+μ_R²)π_R − (μ_Dπ_D + μ_Rπ_R)²
/// Cov(Z,Y) = (μ_D/π_{1|D} + μ_R/π_{1|R} − μ_D/π_{0|D} − μ_R/π_{0|R})·π₀π₁
FisherStats fisher_stats(const FisherWorld& w);

/// Gaussian cells realizing a world: Z | e, y ~ N(m_{ey}, s_e²) with
/// m_{e0} = μ_e + a_e·π_{1|e}, m_{e1} = μ_e − a_e·π_{0|e}. The cell offsets
/// make E[Z|e] = μ_e, Var(Z|e) = Σ_e² and E[Z|Y=0] = μ_0.
struct CellModel {
  std::vector<double> mean_D0, mean_D1, mean_R0, mean_R1;
  std::vector<double> std_D, std_R;
};

/// Minimum-norm cell offsets; throws ValidationError when a cell variance
/// would come out negative.
CellModel cell_model(const FisherWorld& w);

/// Residual of π₀μ₀ + π₁μ₁ = π_Dμ_D + π_Rμ_R (zero for a consistent world).
std::vector<double> consistency_residual(const FisherWorld& w);

/// World from cell counts and D's means, with μ_R solved so that
/// π₀μ₀ + π₁μ₁ = π_Dμ_D + π_Rμ_R holds and Σ_e chosen so the cell model's
/// within-cell stds are within_D and within_R.
FisherWorld consistent_world(double n_D0, double n_D1, double n_R0, double n_R1,
                             std::vector<double> mu_D, std::vector<double> within_D,
                             std::vector<double> within_R);

/// Random world with integer counts, μ_R solved so the class-mean condition
/// holds exactly, and cluster spreads wide enough for a valid cell model.
FisherWorld random_world(std::size_t dims, std::uint64_t seed);

struct TransferCheckOptions {
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
};

struct TransferReport {
  double p = 0.0;
  FisherStats pre;
  std::vector<double> var_post;          // closed form with Σ'_D as written
  std::vector<double> var_post_mixture;  // transferred points carry D's mean and spread
  std::vector<double> cov_post;          // π'_{y|e} substituted into the covariance form
  std::vector<double> cov_p1_claim;      // μ_D(π₁ − π₀)
  double pi_D_post = 0.0;
  double pi_0gD_post = 0.0, pi_1gD_post = 0.0, pi_0gR_post = 0.0, pi_1gR_post = 0.0;
  double skew_gap = 0.0;                  // |π'_{0|D} − π₀|
  std::vector<double> d_term;             // μ_D(1/π'_{1|D} − 1/π'_{0|D})·π₀π₁
  std::vector<double> d_dependence;       // |d_term(p) − d_term(1)|
  std::vector<double> empirical_var, empirical_cov;  // simulated transfer
  bool p1_claim_holds = false;            // only meaningful at p = 1
};

/// Post-transfer statistics for moving a fraction p of cluster R into D.
/// Requires counts. At p = 1 cluster R is empty and its terms drop out.
TransferReport theory_transfer_check(const FisherWorld& w, double p,
                                     const TransferCheckOptions& options = {});

}  // namespace cit

#endif  // CIT_THEORY_HPP
