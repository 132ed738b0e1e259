// SPDX-License-Identifier: Apache-2.0
#include "fst/healpix.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fst::healpix {
namespace {

// Base-face layout of the nested scheme: ring of the face's southern vertex
// (in units of N_side) and its longitude offset (in units of pi/4).
constexpr int kFaceRing[12] = {2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4};
constexpr int kFacePhi[12] = {1, 3, 5, 7, 0, 2, 4, 6, 1, 3, 5, 7};

// Gathers the even bits of v into the low half.
std::int64_t compress_bits(std::uint64_t v) {
  v &= 0x5555555555555555ULL;
  v = (v | (v >> 1)) & 0x3333333333333333ULL;
  v = (v | (v >> 2)) & 0x0f0f0f0f0f0f0f0fULL;
  v = (v | (v >> 4)) & 0x00ff00ff00ff00ffULL;
  v = (v | (v >> 8)) & 0x0000ffff0000ffffULL;
  v = (v | (v >> 16)) & 0x00000000ffffffffULL;
  return static_cast<std::int64_t>(v);
}

struct FaceXY {
  int face;
  std::int64_t ix;
  std::int64_t iy;
};

FaceXY nest_to_face_xy(int z, std::int64_t p) {
  const std::int64_t per_face = std::int64_t{1} << (2 * z);
  const auto face = static_cast<int>(p / per_face);
  const auto local = static_cast<std::uint64_t>(p % per_face);
  return {face, compress_bits(local), compress_bits(local >> 1)};
}

void check_pixel(int z, std::int64_t p) {
  if (p < 0 || p >= n_pixels(z)) {
    throw std::out_of_range("pixel index " + std::to_string(p) + " out of range at zoom " +
                            std::to_string(z));
  }
}

}  // namespace

void check_zoom(int z) {
  if (z < 0 || z > kMaxZoom) {
    throw std::out_of_range("zoom level " + std::to_string(z) + " outside [0, " +
                            std::to_string(kMaxZoom) + "]");
  }
}

std::int64_t n_side(int z) {
  check_zoom(z);
  return std::int64_t{1} << z;
}

std::int64_t n_pixels(int z) {
  check_zoom(z);
  return 12 * (std::int64_t{1} << (2 * z));
}

std::int64_t group_size(int dz) {
  if (dz < 0) throw std::invalid_argument("negative zoom difference");
  check_zoom(dz);
  return std::int64_t{1} << (2 * dz);
}

int zoom_for_pixel_count(std::int64_t count) {
  for (int z = 0; z <= kMaxZoom; ++z) {
    if (n_pixels(z) == count) return z;
    if (n_pixels(z) > count) break;
  }
  throw std::invalid_argument("pixel count " + std::to_string(count) + " is not 12*4^z");
}

PixelRange child_range(std::int64_t p, int z_coarse, int z_fine) {
  check_zoom(z_fine);
  if (z_fine < z_coarse) throw std::invalid_argument("child_range: z_fine < z_coarse");
  check_pixel(z_coarse, p);
  const std::int64_t g = group_size(z_fine - z_coarse);
  return {p * g, (p + 1) * g};
}

std::int64_t parent_of(std::int64_t q, int z_fine, int z_coarse) {
  check_zoom(z_coarse);
  if (z_fine < z_coarse) throw std::invalid_argument("parent_of: z_fine < z_coarse");
  check_pixel(z_fine, q);
  return q >> (2 * (z_fine - z_coarse));
}

double mean_cell_diameter(int z) {
  return std::sqrt(4.0 * std::numbers::pi / static_cast<double>(n_pixels(z)));
}

double mean_cell_diameter_km(int z) { return mean_cell_diameter(z) * kEarthRadiusKm; }

std::int64_t ring_of(int z, std::int64_t p) {
  check_pixel(z, p);
  const auto [face, ix, iy] = nest_to_face_xy(z, p);
  return kFaceRing[face] * n_side(z) - ix - iy - 1;
}

SphCoord pixel_center(int z, std::int64_t p) {
  check_pixel(z, p);
  const std::int64_t nside = n_side(z);
  const auto npix = static_cast<double>(n_pixels(z));
  const auto [face, ix, iy] = nest_to_face_xy(z, p);

  const std::int64_t ring = kFaceRing[face] * nside - ix - iy - 1;
  const double fact2 = 4.0 / npix;
  const double fact1 = static_cast<double>(2 * nside) * fact2;

  std::int64_t nr = nside;
  std::int64_t kshift = 0;
  double theta = 0.0;
  if (ring < nside) {  // north polar cap
    nr = ring;
    const double tmp = static_cast<double>(nr * nr) * fact2;
    // atan2 keeps theta accurate near the pole where acos loses digits
    theta = std::atan2(std::sqrt(tmp * (2.0 - tmp)), 1.0 - tmp);
  } else if (ring > 3 * nside) {  // south polar cap
    nr = 4 * nside - ring;
    const double tmp = static_cast<double>(nr * nr) * fact2;
    theta = std::atan2(std::sqrt(tmp * (2.0 - tmp)), tmp - 1.0);
  } else {  // equatorial belt
    theta = std::acos(static_cast<double>(2 * nside - ring) * fact1);
    kshift = (ring - nside) & 1;
  }

  std::int64_t jp = (kFacePhi[face] * nr + ix - iy + 1 + kshift) / 2;
  if (jp > 4 * nside) jp -= 4 * nside;
  if (jp < 1) jp += 4 * nside;
  double phi = (static_cast<double>(jp) - static_cast<double>(kshift + 1) * 0.5) *
               (std::numbers::pi / 2.0 / static_cast<double>(nr));
  if (phi < 0.0) phi += 2.0 * std::numbers::pi;
  if (phi >= 2.0 * std::numbers::pi) phi -= 2.0 * std::numbers::pi;
  return {theta, phi};
}

double angular_distance(const SphCoord& a, const SphCoord& b) {
  // haversine form, well conditioned for small separations
  const double s_theta = std::sin((b.theta - a.theta) / 2.0);
  const double s_phi = std::sin((b.phi - a.phi) / 2.0);
  const double h = s_theta * s_theta + std::sin(a.theta) * std::sin(b.theta) * s_phi * s_phi;
  return 2.0 * std::asin(std::sqrt(std::min(1.0, h)));
}

}  // namespace fst::healpix
