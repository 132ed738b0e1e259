// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace fst {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Quick invariant suite over the grid, multiscale, attention, model and I/O
/// layers. `scratch_dir` receives temporary files.
std::vector<CheckResult> run_selftest(const std::string& scratch_dir);

}  // namespace fst
