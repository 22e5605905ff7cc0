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

#ifndef CIT_GRADSUITE_HPP
#define CIT_GRADSUITE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cit/autodiff.hpp"

namespace cit {

struct GradSuiteEntry {
  std::string name;
  double tolerance = 0.0;
  ad::GradCheckReport report;
};

/// Finite-difference checks of every tape op (tol 1e-4) and of the composed
/// losses L_c, L_o, L_f and the full training objective with a fixed,
/// noise-free transfer (tol 1e-3), on random 8-node instances.
std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed = 0);

}  // namespace cit

#endif  // CIT_GRADSUITE_HPP
