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

#include "cit/theory.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>

#include "cit/errors.hpp"

namespace cit {
namespace {

bool is_probability(double x) { return x >= 0.0 && x <= 1.0; }

void require_nonzero_conditionals(const FisherWorld& w) {
  if (w.pi_0gD == 0.0 || w.pi_1gD == 0.0 || w.pi_0gR == 0.0 || w.pi_1gR == 0.0)
    throw NumericalError("fisher_stats: a label-given-cluster probability is 0 (division by zero)");
}

struct Offsets {
  double a, b;
};

// Minimum-norm (a, b) with w_D·a + w_R·b = c, where c makes E[Z|Y=0] hit μ_0.
Offsets cell_offsets(const FisherWorld& w, std::size_t d) {
  const double mu0 = w.mu_D[d] / w.pi_0gD + w.mu_R[d] / w.pi_0gR;
  const double c = w.pi_0() * mu0 - w.pi_D * w.pi_0gD * w.mu_D[d] - w.pi_R * w.pi_0gR * w.mu_R[d];
  const double wd = w.pi_D * w.pi_0gD * w.pi_1gD;
  const double wr = w.pi_R * w.pi_0gR * w.pi_1gR;
  const double norm = wd * wd + wr * wr;
  if (norm == 0.0) {
    if (std::fabs(c) > 1e-12) throw ValidationError("cell_model: no cell offsets reproduce the class means");
    return {0.0, 0.0};
  }
  return {c * wd / norm, c * wr / norm};
}

}  // namespace

void FisherWorld::validate() const {
  const std::size_t h = mu_D.size();
  if (h == 0) throw ValidationError("FisherWorld: no dimensions");
  if (mu_R.size() != h || sigma_D.size() != h || sigma_R.size() != h)
    throw ValidationError("FisherWorld: mu_D, mu_R, sigma_D, sigma_R must have equal length");
  for (std::size_t d = 0; d < h; ++d)
    if (!(sigma_D[d] >= 0.0) || !(sigma_R[d] >= 0.0))
      throw ValidationError("FisherWorld: spreads must be non-negative");
  for (double p : {pi_D, pi_R, pi_0gD, pi_1gD, pi_0gR, pi_1gR})
    if (!is_probability(p)) throw ValidationError("FisherWorld: probabilities must lie in [0, 1]");
  if (std::fabs(pi_D + pi_R - 1.0) > 1e-12) throw ValidationError("FisherWorld: pi_D + pi_R != 1");
  if (std::fabs(pi_0gD + pi_1gD - 1.0) > 1e-12 || std::fabs(pi_0gR + pi_1gR - 1.0) > 1e-12)
    throw ValidationError("FisherWorld: label conditionals must sum to 1 per cluster");
  if (has_counts()) {
    for (double n : {n_D0, n_D1, n_R0, n_R1})
      if (!(n >= 0.0)) throw ValidationError("FisherWorld: counts must be non-negative");
    if (n_D != n_D0 + n_D1 || n_R != n_R0 + n_R1)
      throw ValidationError("FisherWorld: cluster counts must equal the sum of their cells");
    const double total = n_D + n_R;
    if (std::fabs(pi_D - n_D / total) > 1e-12 || (n_D > 0 && std::fabs(pi_0gD - n_D0 / n_D) > 1e-12) ||
        (n_R > 0 && std::fabs(pi_0gR - n_R0 / n_R) > 1e-12))
      throw ValidationError("FisherWorld: counts disagree with probabilities");
  }
}

FisherWorld world_from_counts(double n_D0, double n_D1, double n_R0, double n_R1) {
  FisherWorld w;
  w.n_D0 = n_D0;
  w.n_D1 = n_D1;
  w.n_R0 = n_R0;
  w.n_R1 = n_R1;
  w.n_D = n_D0 + n_D1;
  w.n_R = n_R0 + n_R1;
  if (!(w.n_D > 0 && w.n_R > 0)) throw ValidationError("world_from_counts: both clusters need nodes");
  const double total = w.n_D + w.n_R;
  w.pi_D = w.n_D / total;
  w.pi_R = w.n_R / total;
  w.pi_0gD = n_D0 / w.n_D;
  w.pi_1gD = n_D1 / w.n_D;
  w.pi_0gR = n_R0 / w.n_R;
  w.pi_1gR = n_R1 / w.n_R;
  return w;
}

std::vector<double> class_mean(const FisherWorld& w, int label) {
  require_nonzero_conditionals(w);
  const double pd = label == 0 ? w.pi_0gD : w.pi_1gD;
  const double pr = label == 0 ? w.pi_0gR : w.pi_1gR;
  std::vector<double> out(w.dims());
  for (std::size_t d = 0; d < out.size(); ++d) out[d] = w.mu_D[d] / pd + w.mu_R[d] / pr;
  return out;
}

FisherStats fisher_stats(const FisherWorld& w) {
  w.validate();
  require_nonzero_conditionals(w);
  const double pi0 = w.pi_0(), pi1 = w.pi_1();
  FisherStats s{std::vector<double>(w.dims()), std::vector<double>(w.dims())};
  for (std::size_t d = 0; d < w.dims(); ++d) {
    const double mD = w.mu_D[d], mR = w.mu_R[d];
    const double mean = mD * w.pi_D + mR * w.pi_R;
    s.var[d] = (w.sigma_D[d] * w.sigma_D[d] + mD * mD) * w.pi_D +
               (w.sigma_R[d] * w.sigma_R[d] + mR * mR) * w.pi_R - mean * mean;
    s.cov[d] = (mD / w.pi_1gD + mR / w.pi_1gR - mD / w.pi_0gD - mR / w.pi_0gR) * pi0 * pi1;
  }
  return s;
}

CellModel cell_model(const FisherWorld& w) {
  w.validate();
  require_nonzero_conditionals(w);
  const std::size_t h = w.dims();
  CellModel m{std::vector<double>(h), std::vector<double>(h), std::vector<double>(h),
              std::vector<double>(h), std::vector<double>(h), std::vector<double>(h)};
  for (std::size_t d = 0; d < h; ++d) {
    const auto [a, b] = cell_offsets(w, d);
    m.mean_D0[d] = w.mu_D[d] + a * w.pi_1gD;
    m.mean_D1[d] = w.mu_D[d] - a * w.pi_0gD;
    m.mean_R0[d] = w.mu_R[d] + b * w.pi_1gR;
    m.mean_R1[d] = w.mu_R[d] - b * w.pi_0gR;
    const double vd = w.sigma_D[d] * w.sigma_D[d] - w.pi_0gD * w.pi_1gD * a * a;
    const double vr = w.sigma_R[d] * w.sigma_R[d] - w.pi_0gR * w.pi_1gR * b * b;
    if (vd < -1e-12 || vr < -1e-12)
      throw ValidationError("cell_model: cluster spread too small for the class means in dimension " +
                            std::to_string(d));
    m.std_D[d] = std::sqrt(std::max(vd, 0.0));
    m.std_R[d] = std::sqrt(std::max(vr, 0.0));
  }
  return m;
}

std::vector<double> consistency_residual(const FisherWorld& w) {
  const auto mu0 = class_mean(w, 0), mu1 = class_mean(w, 1);
  std::vector<double> out(w.dims());
  for (std::size_t d = 0; d < out.size(); ++d)
    out[d] = w.pi_0() * mu0[d] + w.pi_1() * mu1[d] - (w.pi_D * w.mu_D[d] + w.pi_R * w.mu_R[d]);
  return out;
}

FisherWorld consistent_world(double n_D0, double n_D1, double n_R0, double n_R1,
                             std::vector<double> mu_D, std::vector<double> within_D,
                             std::vector<double> within_R) {
  const std::size_t dims = mu_D.size();
  if (dims == 0 || within_D.size() != dims || within_R.size() != dims)
    throw ValidationError("consistent_world: mu_D and within stds must share a nonzero length");
  FisherWorld w = world_from_counts(n_D0, n_D1, n_R0, n_R1);
  require_nonzero_conditionals(w);
  const double pi0 = w.pi_0(), pi1 = w.pi_1();
  // π₀μ₀ + π₁μ₁ = π_Dμ_D + π_Rμ_R is linear in μ_R; the μ_R coefficient is
  // π₀/π_{0|R} + π₁/π_{1|R} − π_R ≥ 1 − π_R > 0.
  const double coef_R = pi0 / w.pi_0gR + pi1 / w.pi_1gR - w.pi_R;
  const double coef_D = w.pi_D - pi0 / w.pi_0gD - pi1 / w.pi_1gD;
  w.mu_D = std::move(mu_D);
  w.mu_R.resize(dims);
  w.sigma_D.assign(dims, 0.0);
  w.sigma_R.assign(dims, 0.0);
  for (std::size_t d = 0; d < dims; ++d) {
    w.mu_R[d] = w.mu_D[d] * coef_D / coef_R;
    const auto [a, b] = cell_offsets(w, d);
    w.sigma_D[d] = std::sqrt(within_D[d] * within_D[d] + w.pi_0gD * w.pi_1gD * a * a);
    w.sigma_R[d] = std::sqrt(within_R[d] * within_R[d] + w.pi_0gR * w.pi_1gR * b * b);
  }
  return w;
}

FisherWorld random_world(std::size_t dims, std::uint64_t seed) {
  if (dims == 0) throw ValidationError("random_world: dims must be positive");
  Rng rng = make_rng(seed, "fisher-world");
  std::uniform_int_distribution<int> count(20, 500);
  const double nD0 = count(rng), nD1 = count(rng), nR0 = count(rng), nR1 = count(rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> spread(0.5, 1.5);
  std::vector<double> mu(dims), sD(dims), sR(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    mu[d] = normal(rng);
    sD[d] = spread(rng);
    sR[d] = spread(rng);
  }
  return consistent_world(nD0, nD1, nR0, nR1, std::move(mu), std::move(sD), std::move(sR));
}

TransferReport theory_transfer_check(const FisherWorld& w, double p,
                                     const TransferCheckOptions& options) {
  w.validate();
  require_nonzero_conditionals(w);
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("theory_transfer_check: p must lie in [0, 1]");
  if (!w.has_counts()) throw ValidationError("theory_transfer_check: world has no counts");

  const std::size_t h = w.dims();
  const double total = w.n_D + w.n_R;
  const double moved = p * w.n_R;
  const double pi0 = w.pi_0(), pi1 = w.pi_1();
  const bool r_empty = p == 1.0;

  TransferReport r;
  r.p = p;
  r.pre = fisher_stats(w);
  r.pi_D_post = (w.n_D + moved) / total;
  const double pi_R_post = (w.n_R - moved) / total;
  r.pi_0gD_post = (w.n_D0 + p * w.n_R0) / (w.n_D + moved);
  r.pi_1gD_post = (w.n_D1 + p * w.n_R1) / (w.n_D + moved);
  // Uniform selection leaves R's label mix unchanged while R is nonempty.
  r.pi_0gR_post = w.pi_0gR;
  r.pi_1gR_post = w.pi_1gR;
  r.skew_gap = std::fabs(r.pi_0gD_post - pi0);

  const double keep = w.n_D / (w.n_D + moved);  // share of D' that was always in D
  for (std::size_t d = 0; d < h; ++d) {
    const double mD = w.mu_D[d], mR = w.mu_R[d];
    const double sD2 = w.sigma_D[d] * w.sigma_D[d], sR2 = w.sigma_R[d] * w.sigma_R[d];
    // Σ'_D² = keep·Σ_D² + keep·μ_D² + (1−keep)·μ_R² − (keep·μ_D + (1−keep)·μ_R)²,
    // with the last three terms collapsed to the two-point mixture variance.
    const double sD2_post = keep * sD2 + keep * (1.0 - keep) * (mD - mR) * (mD - mR);
    const double mean_post = mD * r.pi_D_post + mR * pi_R_post;
    r.var_post.push_back((sD2_post + mD * mD) * r.pi_D_post + (sR2 + mR * mR) * pi_R_post -
                         mean_post * mean_post);
    r.var_post_mixture.push_back((sD2 + mD * mD) * r.pi_D_post + (sR2 + mR * mR) * pi_R_post -
                                 mean_post * mean_post);

    const double d_term = mD * (1.0 / r.pi_1gD_post - 1.0 / r.pi_0gD_post) * pi0 * pi1;
    const double d_term_p1 = mD * (1.0 / pi1 - 1.0 / pi0) * pi0 * pi1;
    const double r_term = r_empty ? 0.0 : mR * (1.0 / r.pi_1gR_post - 1.0 / r.pi_0gR_post) * pi0 * pi1;
    r.cov_post.push_back(d_term + r_term);
    r.d_term.push_back(d_term);
    r.d_dependence.push_back(std::fabs(d_term - d_term_p1));
    r.cov_p1_claim.push_back(mD * (pi1 - pi0));
  }
  if (r_empty) {
    r.p1_claim_holds = true;
    for (std::size_t d = 0; d < h; ++d)
      r.p1_claim_holds = r.p1_claim_holds && std::fabs(r.cov_post[d] - r.cov_p1_claim[d]) <=
                                                 1e-12 * std::max(1.0, std::fabs(r.cov_p1_claim[d]));
  }

  if (options.samples > 0) {
    std::optional<CellModel> cells;
    try {
      cells = cell_model(w);
    } catch (const ValidationError&) {
      // Worlds without a Gaussian-cell realization are checked analytically only.
    }
    if (cells) {
      Rng rng = make_rng(options.seed, "theory-transfer-sim");
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::normal_distribution<double> normal(0.0, 1.0);
      std::vector<double> sz(h, 0.0), szz(h, 0.0), szy(h, 0.0);
      double sy = 0.0;
      for (std::size_t i = 0; i < options.samples; ++i) {
        const bool in_D = u(rng) < w.pi_D;
        const int y = u(rng) < (in_D ? w.pi_1gD : w.pi_1gR) ? 1 : 0;
        const bool transfer = !in_D && u(rng) < p;
        sy += y;
        for (std::size_t d = 0; d < h; ++d) {
          const double mean = in_D ? (y ? cells->mean_D1[d] : cells->mean_D0[d])
                                   : (y ? cells->mean_R1[d] : cells->mean_R0[d]);
          double z = mean + (in_D ? cells->std_D[d] : cells->std_R[d]) * normal(rng);
          if (transfer) z = w.sigma_D[d] * (z - w.mu_R[d]) / w.sigma_R[d] + w.mu_D[d];
          sz[d] += z;
          szz[d] += z * z;
          szy[d] += z * y;
        }
      }
      const double n = static_cast<double>(options.samples);
      for (std::size_t d = 0; d < h; ++d) {
        const double ez = sz[d] / n;
        r.empirical_var.push_back(szz[d] / n - ez * ez);
        r.empirical_cov.push_back(szy[d] / n - ez * sy / n);
      }
    }
  }
  return r;
}

}  // namespace cit
