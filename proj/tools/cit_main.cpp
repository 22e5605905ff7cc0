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

// cit: experiment driver.
//
//   cit run <spec-file> --out <dir> [--threads N]
//   cit theory --p 0,0.5,1 --out <dir> [--worlds 20] [--dims 1] [--samples 100000] [--seed 0]
//   cit gradcheck [--seed 0]
//   cit preset [sbm_shift]
//   cit version
//
// Exit status: 0 success, 1 invalid input, 2 numerical failure.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cit/errors.hpp"
#include "cit/experiment.hpp"
#include "cit/gradsuite.hpp"
#include "cit/version.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kNumerical = 2;

int report_files(const cit::ExperimentResult& r) {
  for (const auto& f : r.files) std::cout << "wrote " << f.string() << '\n';
  return kOk;
}

int gradcheck(std::uint64_t seed) {
  bool ok = true;
  for (const auto& e : cit::run_gradient_suite(seed)) {
    std::printf("%-4s %-68s entries=%-4zu max_rel_err=%.3e tol=%.0e\n", e.report.passed ? "ok" : "FAIL", e.name.c_str(), e.report.entries_checked,
                e.report.max_rel_error, e.tolerance);
    ok = ok && e.report.passed;
  }
  return ok ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cluster information transfer workbench"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment spec file");
  std::string spec_path, out_dir;
  std::size_t threads = 0;
  run->add_option("spec", spec_path, "Spec file")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--threads", threads, "Override the spec's worker count");

  auto* theory = app.add_subcommand("theory", "Check the Fisher-statistics transfer analysis");
  cit::TheorySpec tspec;
  std::string theory_out;
  theory->add_option("--p", tspec.p_grid, "Transfer probabilities")->delimiter(',')->required();
  theory->add_option("--out", theory_out, "Output directory")->required();
  theory->add_option("--worlds", tspec.worlds, "Random worlds")->capture_default_str();
  theory->add_option("--dims", tspec.dims, "Dimensions per world")->capture_default_str();
  theory->add_option("--samples", tspec.samples, "Simulated points per check")->capture_default_str();
  theory->add_option("--seed", tspec.seed, "Seed")->capture_default_str();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every op and loss");
  std::uint64_t grad_seed = 0;
  grad->add_option("--seed", grad_seed, "Instance seed")->capture_default_str();

  auto* preset = app.add_subcommand("preset", "Print a preset spec file");
  std::string preset_name = "sbm_shift";
  preset->add_option("name", preset_name, "Preset name (sbm_shift)")->capture_default_str();

  app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*run) {
      cit::ExperimentSpec spec = cit::load_spec(spec_path);
      if (threads > 0) spec.threads = threads;
      return report_files(cit::run_experiment(spec, out_dir));
    }
    if (*theory) {
      cit::ExperimentSpec spec;
      spec.kind = cit::ExperimentKind::TheoryCheck;
      spec.name = "theory";
      spec.theory = tspec;
      return report_files(cit::run_experiment(spec, theory_out));
    }
    if (*grad) return gradcheck(grad_seed);
    if (*preset) {
      if (preset_name != "sbm_shift") throw cit::ValidationError("unknown preset '" + preset_name + "'");
      std::cout << cit::resolved_config(cit::sbm_shift_preset());
      return kOk;
    }
    std::cout << "cit " << cit::kVersion << '\n';
    return kOk;
  } catch (const cit::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  }
}
