// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "fst/dataset.hpp"
#include "fst/model.hpp"
#include "fst/trainer.hpp"

namespace fst {

struct LayerTrace {
  /// Pyramid after each block (and its scale constraint when applied per block).
  std::vector<FieldPyramid> layers;
  /// Pyramid after the final scale-constraining layer.
  FieldPyramid final;
  /// Decomposition of the ground truth over the model zooms.
  FieldPyramid truth;
};

/// Runs one sample through the model in model units.
LayerTrace trace_layers(const FSTModel& model, const SRPair& sample, const Normalizer& norm);

/// Writes layer<i>_r<z>.fsf for every block and residual level, and
/// truth_r<z>.fsf for the ground truth, in kelvin. Models that constrain
/// scales after every block also get final_r<z>.fsf for the final layer.
/// Returns the paths written.
std::vector<std::string> inspect_layers(const FSTModel& model, const SRPair& sample, const Normalizer& norm,
                                        const std::string& out_dir);

}  // namespace fst
