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

// Reference computations for the tests. Each one is written from the textbook
// definition and shares no code with the library it checks.

#ifndef CIT_TESTS_ORACLES_HPP
#define CIT_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cit/matrix.hpp"

namespace oracle {

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& labels) {
  double hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (pred[i] == labels[i]) hits += 1;
  return hits / static_cast<double>(labels.size());
}

// F1 = 2PR/(P+R) per class, with undefined precision or recall read as 0.
inline double macro_f1(const std::vector<int>& pred, const std::vector<int>& labels, int classes) {
  double total = 0;
  for (int c = 0; c < classes; ++c) {
    double tp = 0, predicted = 0, actual = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      predicted += pred[i] == c;
      actual += labels[i] == c;
      tp += pred[i] == c && labels[i] == c;
    }
    const double precision = predicted > 0 ? tp / predicted : 0.0;
    const double recall = actual > 0 ? tp / actual : 0.0;
    if (precision + recall > 0) total += 2 * precision * recall / (precision + recall);
  }
  return total / classes;
}

// Probability that a random positive outscores a random negative, ties half.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double won = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1;
      if (scores[i] > scores[j]) won += 1;
      else if (scores[i] == scores[j]) won += 0.5;
    }
  }
  return won / pairs;
}

// Mean silhouette over all points; a point alone in its cluster scores 0.
inline double silhouette(const cit::DenseMatrix& x, const std::vector<int>& labels) {
  const std::size_t n = x.rows();
  auto dist = [&](std::size_t i, std::size_t j) {
    double ss = 0;
    for (std::size_t d = 0; d < x.cols(); ++d) ss += std::pow(x(i, d) - x(j, d), 2);
    return std::sqrt(ss);
  };
  const std::set<int> ids(labels.begin(), labels.end());
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<int, std::pair<double, double>> by_cluster;  // sum, count
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      auto& [sum, count] = by_cluster[labels[j]];
      sum += dist(i, j);
      count += 1;
    }
    const auto own = by_cluster.find(labels[i]);
    if (own == by_cluster.end() || own->second.second == 0) continue;
    const double a = own->second.first / own->second.second;
    double b = std::numeric_limits<double>::infinity();
    for (int c : ids)
      if (c != labels[i]) b = std::min(b, by_cluster[c].first / by_cluster[c].second);
    if (std::max(a, b) > 0) total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

// Continued fraction for the regularized incomplete beta (modified Lentz).
inline double beta_cf(double a, double b, double x) {
  const double tiny = 1e-300;
  double c = 1.0, d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double step = d * c;
    h *= step;
    if (std::fabs(step - 1.0) < 1e-15) return h;
  }
  throw std::runtime_error("beta_cf did not converge");
}

inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

// Student t CDF through the incomplete beta function.
inline double t_cdf(double t, double df) {
  const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return t >= 0 ? 1.0 - tail : tail;
}

// Two-sided critical value by bisection on the incomplete-beta CDF.
inline double t_critical(double alpha, double df) {
  double lo = 0.0, hi = 1000.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (t_cdf(mid, df) < 1.0 - alpha / 2.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Row-stochastic n×m matrix. Mixes dense Dirichlet-like rows with exact
// one-hot rows so both the interior and the boundary get exercised.
template <class Rng>
cit::DenseMatrix random_stochastic(std::size_t n, std::size_t m, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> gamma1(1.0);
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  const double one_hot_share = unit(rng);
  cit::DenseMatrix s(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    if (unit(rng) < one_hot_share) {
      s(i, pick(rng)) = 1.0;
      continue;
    }
    double total = 0;
    for (std::size_t k = 0; k < m; ++k) total += s(i, k) = gamma1(rng);
    for (std::size_t k = 0; k < m; ++k) s(i, k) /= total;
  }
  return s;
}

// Symmetric 0/1 edge list without self-loops.
template <class Rng>
std::vector<std::pair<std::size_t, std::size_t>> random_edges(std::size_t n, double p, Rng& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (coin(rng)) edges.emplace_back(i, j);
  return edges;
}

struct MomentEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

struct FisherMonteCarlo {
  MomentEstimate var;
  MomentEstimate cov;
};

// Draws (cluster, label, z) per the two-cluster generative story: cluster D
// with probability pi_D, label 1 with probability pi_1|e, then z from the
// Gaussian cell N(mean_ey, std_e). Returns Var(Z) and Cov(Z, Y) with their
// plug-in standard errors.
template <class Rng>
FisherMonteCarlo sample_fisher(double pi_D, double pi_1gD, double pi_1gR, double mean_D0, double mean_D1,
                               double mean_R0, double mean_R1, double std_D, double std_R, std::size_t samples,
                               Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(samples), y(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const bool in_D = unit(rng) < pi_D;
    const bool one = unit(rng) < (in_D ? pi_1gD : pi_1gR);
    const double mean = in_D ? (one ? mean_D1 : mean_D0) : (one ? mean_R1 : mean_R0);
    z[i] = mean + (in_D ? std_D : std_R) * normal(rng);
    y[i] = one ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(samples);
  double mz = 0, my = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    mz += z[i];
    my += y[i];
  }
  mz /= n;
  my /= n;
  double m2 = 0, m4 = 0, c = 0, c2 = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double dz = z[i] - mz, dy = y[i] - my;
    m2 += dz * dz;
    m4 += dz * dz * dz * dz;
    c += dz * dy;
    c2 += dz * dz * dy * dy;
  }
  m2 /= n;
  m4 /= n;
  c /= n;
  c2 /= n;
  FisherMonteCarlo out;
  out.var = {m2, std::sqrt(std::max(m4 - m2 * m2, 0.0) / n)};
  out.cov = {c, std::sqrt(std::max(c2 - c * c, 0.0) / n)};
  return out;
}

}  // namespace oracle

#endif  // CIT_TESTS_ORACLES_HPP
