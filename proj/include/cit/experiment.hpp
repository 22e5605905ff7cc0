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

// Experiment specs and the driver that runs them.
//
// Spec files are line-oriented text:
//
//   cit-spec 1
//   # comment
//   kind = sbm_shift
//   seeds = 0, 1, 2
//   cit.p = 0.1
//   schedule.shift = 0.005:0.0005, 0.0025:0.003
//
// Keys are dotted paths; unknown keys are rejected. The full key list with
// defaults is what resolved_config() prints for a default spec.

#ifndef CIT_EXPERIMENT_HPP
#define CIT_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cit/trainer.hpp"

namespace cit {

enum class ExperimentKind { SbmShift, Perturb, SingleTrain, TheoryCheck, Sweep };

std::string_view kind_name(ExperimentKind kind) noexcept;

struct SbmPreset {
  std::vector<std::size_t> block_sizes{500, 500};
  double p_inter = 0.005;   // cross-block edge probability
  double p_intra = 0.0005;  // same-block edge probability
  std::size_t feature_dim = 50;
  double separation = 1.0;
  double class_std = 1.0;
};

struct DataSpec {
  std::string source = "sbm";  // sbm | files
  SbmPreset sbm;
  std::string edges, features, labels, split;  // files source; split optional
  std::size_t train_per_class = 20;
  std::size_t val_count = 0;
};

struct ShiftPoint {
  double p_inter = 0.0;
  double p_intra = 0.0;
};

struct PerturbStep {
  std::string op;  // add | delete
  double ratio = 0.0;
};

struct SweepSpec {
  std::string param = "m";  // m | p | k_period
  std::vector<double> values{2, 4, 8, 16};
};

struct TheorySpec {
  std::vector<double> p_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  std::size_t worlds = 20;
  std::size_t dims = 1;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::SbmShift;
  std::string name = "experiment";
  std::vector<std::uint64_t> seeds{0};
  bool baseline = true;  // also train the plain GCN
  std::size_t threads = 1;
  DataSpec data;
  CitConfig cit;
  std::vector<ShiftPoint> shift;
  std::vector<PerturbStep> perturb;
  SweepSpec sweep;
  TheorySpec theory;

  /// Throws ValidationError naming the offending field path.
  void validate() const;
};

/// n evenly spaced points from `from` to `to` inclusive.
std::vector<ShiftPoint> linear_schedule(ShiftPoint from, ShiftPoint to, std::size_t steps);

/// The structure-shift preset: two blocks of 500, d = 50, 20 labels per
/// class, six-step schedule from (0.5%, 0.05%) to (0.25%, 0.3%), seeds 0..4.
ExperimentSpec sbm_shift_preset();

ExperimentSpec parse_spec(std::string_view text, const std::string& source = "<spec>");
ExperimentSpec load_spec(const std::filesystem::path& path);
/// Every field with its value, in spec-file syntax; parse_spec round-trips it.
std::string resolved_config(const ExperimentSpec& spec);

/// One method's observations: values[i] holds one entry per seed at xs[i].
struct CurveSeries {
  std::string method;
  std::vector<std::string> xs;
  std::vector<std::vector<double>> values;
};

/// CSV with header `x,<method>_mean,<method>_std,...` and one row per x shared
/// by all series (in the first series' order). Std is the sample std (0 for a
/// single value).
std::string emit_plot_data(std::span<const CurveSeries> series, std::string_view x_name = "x");

struct ExperimentResult {
  std::vector<CurveSeries> curves;  // accuracy per method
  std::string summary_csv;
  std::vector<std::filesystem::path> files;
};

/// Runs the spec and writes summary.csv, curves/, records/, resolved-config.txt
/// and timing.csv under out_dir. Run records are written as runs finish, so a
/// failure leaves the completed ones behind.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir);
ExperimentResult run_experiment(const std::filesystem::path& spec_file,
                                const std::filesystem::path& out_dir);

}  // namespace cit

#endif  // CIT_EXPERIMENT_HPP
