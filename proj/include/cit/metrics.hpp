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

#ifndef CIT_METRICS_HPP
#define CIT_METRICS_HPP

#include <cstddef>
#include <span>

#include "cit/matrix.hpp"

namespace cit {

double accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Unweighted mean of per-class F1 over all `class_count` classes. A class
/// that appears in neither predictions nor labels scores 0.
double macro_f1(std::span<const int> predictions, std::span<const int> labels, int class_count);

/// Mann-Whitney AUC for labels in {0, 1}; tied scores count 1/2.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Mean silhouette over points (rows) with Euclidean distance. Singleton
/// clusters score 0, as does a point with a = b = 0.
double silhouette(const DenseMatrix& points, std::span<const int> assignments);

struct TTestResult {
  double t_statistic = 0.0;
  std::size_t degrees_of_freedom = 0;
  double mean_difference = 0.0;
  bool significant_05 = false;
  bool significant_01 = false;
};

/// Paired two-tailed t-test on a − b, with the sample (n − 1) std.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

double t_pdf(double t, double df);
/// Student-t CDF via adaptive Simpson integration of the density.
double t_cdf(double t, double df);
/// Two-tailed critical value: P(|T| > c) = alpha. Cached for df <= 200 at the
/// 0.05 and 0.01 levels.
double t_critical(double alpha, std::size_t df);

}  // namespace cit

#endif  // CIT_METRICS_HPP
