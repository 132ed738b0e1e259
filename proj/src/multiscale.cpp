// SPDX-License-Identifier: Apache-2.0
#include "fst/multiscale.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fst/healpix.hpp"
#include "fst/ops.hpp"

namespace fst {

std::size_t FieldPyramid::index_of(int zoom) const {
  const auto it = std::find(zooms.begin(), zooms.end(), zoom);
  if (it == zooms.end()) {
    throw std::invalid_argument("zoom " + std::to_string(zoom) + " is not a pyramid level");
  }
  return static_cast<std::size_t>(it - zooms.begin());
}

int field_zoom(const Tensor& field) {
  if (field.rank() != 3) {
    throw std::invalid_argument("field must be [B, N_pix, C], got " + shape_string(field.shape()));
  }
  return healpix::zoom_for_pixel_count(static_cast<std::int64_t>(field.dim(1)));
}

void validate_zoom_list(const std::vector<int>& zooms) {
  if (zooms.empty()) throw std::invalid_argument("empty zoom list");
  for (std::size_t i = 0; i < zooms.size(); ++i) {
    healpix::check_zoom(zooms[i]);
    if (i > 0 && zooms[i] <= zooms[i - 1]) {
      throw std::invalid_argument("zoom list must be strictly increasing");
    }
  }
}

void validate_pyramid(const FieldPyramid& p) {
  validate_zoom_list(p.zooms);
  if (p.levels.size() != p.zooms.size()) {
    throw std::invalid_argument("pyramid has " + std::to_string(p.levels.size()) + " levels for " +
                                std::to_string(p.zooms.size()) + " zooms");
  }
  const Shape& first = p.levels[0].shape();
  for (std::size_t i = 0; i < p.levels.size(); ++i) {
    const auto& lv = p.levels[i];
    if (field_zoom(lv) != p.zooms[i]) {
      throw std::invalid_argument("level " + std::to_string(i) + " has " +
                                  std::to_string(lv.dim(1)) + " pixels, zoom " +
                                  std::to_string(p.zooms[i]) + " expected");
    }
    if (lv.dim(0) != first[0] || lv.dim(2) != first[2]) {
      throw std::invalid_argument("pyramid levels disagree on batch or channel count");
    }
  }
}

Tensor coarsen(const Tensor& field, int z_coarse) {
  const int z_fine = field_zoom(field);
  healpix::check_zoom(z_coarse);
  if (z_coarse > z_fine) throw std::invalid_argument("coarsen to a finer zoom");
  return group_mean_pool(field, static_cast<std::size_t>(healpix::group_size(z_fine - z_coarse)));
}

Tensor upsample(const Tensor& field, int z_fine) {
  const int z_coarse = field_zoom(field);
  healpix::check_zoom(z_fine);
  if (z_fine < z_coarse) throw std::invalid_argument("upsample to a coarser zoom");
  return repeat_upsample(field, static_cast<std::size_t>(healpix::group_size(z_fine - z_coarse)));
}

FieldPyramid decompose(const Tensor& field, std::vector<int> zooms) {
  validate_zoom_list(zooms);
  if (zooms.back() != field_zoom(field)) {
    throw std::invalid_argument("last listed zoom must equal the field's zoom");
  }
  FieldPyramid p;
  p.levels.resize(zooms.size());
  Tensor current = field;
  for (std::size_t i = zooms.size() - 1; i > 0; --i) {
    Tensor coarse = coarsen(current, zooms[i - 1]);
    p.levels[i] = sub(current, upsample(coarse, zooms[i]));
    current = std::move(coarse);
  }
  p.levels[0] = std::move(current);
  p.zooms = std::move(zooms);
  return p;
}

Tensor reconstruct(const FieldPyramid& p) {
  validate_pyramid(p);
  Tensor out = p.levels[0];
  for (std::size_t i = 1; i < p.levels.size(); ++i) {
    out = add(upsample(out, p.zooms[i]), p.levels[i]);
  }
  return out;
}

std::vector<ScalePair> adjacent_schedule(const std::vector<int>& zooms) {
  std::vector<ScalePair> s;
  for (std::size_t i = zooms.size(); i-- > 1;) s.push_back({zooms[i], zooms[i - 1]});
  return s;
}

FieldPyramid scale_constrain(const FieldPyramid& p, const std::vector<ScalePair>& schedule) {
  validate_pyramid(p);
  const auto steps = schedule.empty() ? adjacent_schedule(p.zooms) : schedule;
  FieldPyramid out = p;
  for (const auto& [fine, coarse] : steps) {
    if (coarse >= fine) throw std::invalid_argument("scale pair must go from fine to coarse");
    const std::size_t fi = out.index_of(fine);
    const std::size_t ci = out.index_of(coarse);
    const auto g = static_cast<std::size_t>(healpix::group_size(fine - coarse));
    const Tensor m = group_mean_pool(out.levels[fi], g);
    out.levels[fi] = sub(out.levels[fi], repeat_upsample(m, g));
    out.levels[ci] = add(out.levels[ci], m);
  }
  return out;
}

FieldPyramid zeros_like(const FieldPyramid& like) {
  FieldPyramid z{like.zooms, {}};
  for (const auto& lv : like.levels) z.levels.push_back(Tensor::zeros(lv.shape()));
  return z;
}

double max_abs_parent_mean(const FieldPyramid& p, int zoom, int parent_zoom) {
  const Tensor m = coarsen(p.level(zoom).detach(), parent_zoom);
  double worst = 0.0;
  for (double v : m.data()) worst = std::max(worst, std::abs(v));
  return worst;
}

}  // namespace fst
