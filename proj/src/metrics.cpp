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

#include "cit/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cit/errors.hpp"

namespace cit {
namespace {

void check_pair(std::span<const int> predictions, std::span<const int> labels, const char* who) {
  if (predictions.empty()) throw ValidationError(std::string(who) + ": empty input");
  if (predictions.size() != labels.size())
    throw ValidationError(std::string(who) + ": " + std::to_string(predictions.size()) +
                          " predictions vs " + std::to_string(labels.size()) + " labels");
}

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive(double df, double a, double b, double fa, double fm, double fb, double whole,
                double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = t_pdf(lm, df), frm = t_pdf(rm, df);
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive(df, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adaptive(df, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

double integrate_pdf(double df, double a, double b) {
  const double fa = t_pdf(a, df), fb = t_pdf(b, df), fm = t_pdf(0.5 * (a + b), df);
  return adaptive(df, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), 1e-10, 50);
}

double solve_critical(double alpha, double df) {
  const double target = 1.0 - alpha / 2.0;
  double lo = 0.0, hi = 1.0;
  while (t_cdf(hi, df) < target) {
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (t_cdf(mid, df) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

constexpr std::size_t kCachedDf = 200;

}  // namespace

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  check_pair(predictions, labels, "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double macro_f1(std::span<const int> predictions, std::span<const int> labels, int class_count) {
  check_pair(predictions, labels, "macro_f1");
  if (class_count < 1) throw ValidationError("macro_f1: class_count must be positive");
  std::vector<std::size_t> tp(class_count), fp(class_count), fn(class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i], y = labels[i];
    if (y < 0 || y >= class_count || p < 0 || p >= class_count)
      throw ValidationError("macro_f1: class id out of range at index " + std::to_string(i));
    if (p == y) {
      ++tp[y];
    } else {
      ++fp[p];
      ++fn[y];
    }
  }
  double total = 0.0;
  for (int c = 0; c < class_count; ++c) {
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom > 0) total += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
  }
  return total / class_count;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw ValidationError("roc_auc: " + std::to_string(scores.size()) + " scores vs " +
                          std::to_string(labels.size()) + " labels");
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("roc_auc: labels must be 0 or 1");
    pos += y == 1;
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw ValidationError("roc_auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of midranks of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum += midrank;
    i = j;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double silhouette(const DenseMatrix& points, std::span<const int> assignments) {
  const std::size_t n = points.rows();
  if (assignments.size() != n)
    throw ValidationError("silhouette: " + std::to_string(n) + " points vs " +
                          std::to_string(assignments.size()) + " assignments");
  std::vector<int> ids(assignments.begin(), assignments.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 2) throw ValidationError("silhouette: need at least 2 clusters");
  std::vector<std::size_t> cluster(n), sizes(ids.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    cluster[i] = static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), assignments[i]) - ids.begin());
    ++sizes[cluster[i]];
  }

  std::vector<double> dist_sum(ids.size());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
    auto pi = points.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      auto pj = points.row(j);
      double ss = 0.0;
      for (std::size_t d = 0; d < pi.size(); ++d) ss += (pi[d] - pj[d]) * (pi[d] - pj[d]);
      dist_sum[cluster[j]] += std::sqrt(ss);
    }
    const std::size_t own = cluster[i];
    if (sizes[own] == 1) continue;
    const double a = dist_sum[own] / static_cast<double>(sizes[own] - 1);
    double b = INFINITY;
    for (std::size_t c = 0; c < ids.size(); ++c)
      if (c != own) b = std::min(b, dist_sum[c] / static_cast<double>(sizes[c]));
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ValidationError("paired_t_test: samples differ in length (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  if (a.size() < 2) throw ValidationError("paired_t_test: need at least 2 pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) throw NumericalError("paired_t_test: all differences are equal (zero variance)");

  TTestResult r;
  r.degrees_of_freedom = n - 1;
  r.mean_difference = mean;
  r.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
  const double abs_t = std::fabs(r.t_statistic);
  r.significant_05 = abs_t > t_critical(0.05, r.degrees_of_freedom);
  r.significant_01 = abs_t > t_critical(0.01, r.degrees_of_freedom);
  return r;
}

double t_pdf(double t, double df) {
  const double log_norm = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) -
                          0.5 * std::log(df * std::numbers::pi);
  return std::exp(log_norm - (df + 1.0) / 2.0 * std::log1p(t * t / df));
}

double t_cdf(double t, double df) {
  if (!(df > 0.0)) throw ValidationError("t_cdf: degrees of freedom must be positive");
  if (t == 0.0) return 0.5;
  const double half = integrate_pdf(df, 0.0, std::fabs(t));
  return t > 0.0 ? 0.5 + half : 0.5 - half;
}

double t_critical(double alpha, std::size_t df) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("t_critical: alpha must lie in (0, 1)");
  if (df == 0) throw ValidationError("t_critical: degrees of freedom must be positive");
  const int level = alpha == 0.05 ? 0 : alpha == 0.01 ? 1 : -1;
  if (level < 0 || df > kCachedDf) return solve_critical(alpha, static_cast<double>(df));

  static std::mutex mu;
  static std::array<std::array<std::optional<double>, kCachedDf + 1>, 2> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[level][df];
  if (!slot) slot = solve_critical(alpha, static_cast<double>(df));
  return *slot;
}

}  // namespace cit
