// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace fst::healpix {

/// Highest zoom level whose nested indices fit in a signed 64-bit integer.
inline constexpr int kMaxZoom = 29;

inline constexpr double kEarthRadiusKm = 6371.0;

/// Half-open range of nested pixel indices.
struct PixelRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;

  [[nodiscard]] std::int64_t size() const { return end - begin; }
  [[nodiscard]] bool contains(std::int64_t p) const { return p >= begin && p < end; }
  friend bool operator==(const PixelRange&, const PixelRange&) = default;
};

/// Colatitude theta in [0, pi], longitude phi in [0, 2 pi).
struct SphCoord {
  double theta = 0.0;
  double phi = 0.0;
};

/// Throws std::out_of_range unless 0 <= z <= kMaxZoom.
void check_zoom(int z);

std::int64_t n_side(int z);
std::int64_t n_pixels(int z);

/// 4^dz, the number of descendants a pixel has dz levels below.
std::int64_t group_size(int dz);

/// Inverse of n_pixels; throws std::invalid_argument if `count` is not 12 * 4^z.
int zoom_for_pixel_count(std::int64_t count);

/// Descendants of pixel `p` (at zoom `z_coarse`) at zoom `z_fine`.
PixelRange child_range(std::int64_t p, int z_coarse, int z_fine);

/// Ancestor of pixel `q` (at zoom `z_fine`) at zoom `z_coarse`.
std::int64_t parent_of(std::int64_t q, int z_fine, int z_coarse);

/// Mean cell diameter sqrt(4 pi / N_pix) in radians.
double mean_cell_diameter(int z);
double mean_cell_diameter_km(int z);

/// Center of nested pixel `p` at zoom `z`.
SphCoord pixel_center(int z, std::int64_t p);

/// Index of the iso-latitude ring (1 .. 4 N_side - 1, north to south) holding pixel `p`.
std::int64_t ring_of(int z, std::int64_t p);

/// Great-circle distance between two points on the unit sphere.
double angular_distance(const SphCoord& a, const SphCoord& b);

}  // namespace fst::healpix
