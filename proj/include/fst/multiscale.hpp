// SPDX-License-Identifier: Apache-2.0
//
// Fixed multi-scale decomposition of HEALPix fields. A field is a tensor of
// shape [B, N_pix(z), C] in nested order; its zoom is implied by the pixel axis.
// Every operation here is linear and built from differentiable tensor ops.
#pragma once

#include <vector>

#include "fst/tensor.hpp"

namespace fst {

/// Coarse field plus one residual per further listed zoom.
/// levels[0] lives at zooms[0]; levels[i] (i >= 1) is the residual at zooms[i]
/// relative to zooms[i-1].
struct FieldPyramid {
  std::vector<int> zooms;
  std::vector<Tensor> levels;

  [[nodiscard]] int input_zoom() const { return zooms.back(); }
  [[nodiscard]] std::size_t size() const { return zooms.size(); }
  /// Position of `zoom` in `zooms`; throws std::invalid_argument if absent.
  [[nodiscard]] std::size_t index_of(int zoom) const;
  [[nodiscard]] const Tensor& level(int zoom) const { return levels[index_of(zoom)]; }
};

/// One scale-constraining step: recenter `fine` per parent cell of `coarse`.
struct ScalePair {
  int fine = 0;
  int coarse = 0;
};

/// Zoom of a [B, N_pix, C] field; throws if the pixel count is not 12*4^z.
int field_zoom(const Tensor& field);

/// Throws unless zooms are non-empty, strictly increasing and within range.
void validate_zoom_list(const std::vector<int>& zooms);

/// Throws unless every level is [B, N_pix(zoom), C] with shared B and C.
void validate_pyramid(const FieldPyramid& p);

Tensor coarsen(const Tensor& field, int z_coarse);
Tensor upsample(const Tensor& field, int z_fine);

/// Fine-to-coarse decomposition over `zooms`; zooms.back() must be the field's zoom.
FieldPyramid decompose(const Tensor& field, std::vector<int> zooms);

/// Sum of all upsampled levels at the finest zoom.
Tensor reconstruct(const FieldPyramid& p);

/// Adjacent listed pairs, finest first.
std::vector<ScalePair> adjacent_schedule(const std::vector<int>& zooms);

/// Moves each fine level's per-parent mean onto the coarser level, in schedule
/// order. An empty schedule means adjacent_schedule(p.zooms).
FieldPyramid scale_constrain(const FieldPyramid& p, const std::vector<ScalePair>& schedule = {});

/// Pyramid of zeros shaped like `like`.
FieldPyramid zeros_like(const FieldPyramid& like);

/// Largest |mean| of level `zoom` over the parent cells at `parent_zoom`. Test helper.
double max_abs_parent_mean(const FieldPyramid& p, int zoom, int parent_zoom);

}  // namespace fst
