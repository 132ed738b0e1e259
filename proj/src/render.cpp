// SPDX-License-Identifier: Apache-2.0
#include "fst/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "fst/config.hpp"
#include "fst/healpix.hpp"

namespace fst {

NearestPixel::NearestPixel(int zoom) : zoom_(zoom) {
  healpix::check_zoom(zoom);
  rings_.resize(static_cast<std::size_t>(4 * healpix::n_side(zoom) - 1));
  std::vector<std::vector<std::pair<double, std::int64_t>>> members(rings_.size());
  for (std::int64_t p = 0; p < healpix::n_pixels(zoom); ++p) {
    const auto c = healpix::pixel_center(zoom, p);
    const auto r = static_cast<std::size_t>(healpix::ring_of(zoom, p) - 1);
    rings_[r].theta = c.theta;
    members[r].emplace_back(c.phi, p);
  }
  for (std::size_t r = 0; r < rings_.size(); ++r) {
    std::sort(members[r].begin(), members[r].end());
    for (const auto& [phi, p] : members[r]) {
      rings_[r].phi.push_back(phi);
      rings_[r].pixels.push_back(p);
    }
  }
}

std::int64_t NearestPixel::find(double theta, double phi) const {
  const auto it = std::lower_bound(rings_.begin(), rings_.end(), theta,
                                   [](const Ring& r, double t) { return r.theta < t; });
  const auto centre = static_cast<std::ptrdiff_t>(it - rings_.begin());
  const healpix::SphCoord q{theta, phi};
  double best = std::numeric_limits<double>::infinity();
  std::int64_t best_pixel = -1;
  // Ring spacing is uneven near the poles, so look a couple of rings either side.
  for (std::ptrdiff_t r = centre - 2; r <= centre + 1; ++r) {
    if (r < 0 || r >= static_cast<std::ptrdiff_t>(rings_.size())) continue;
    const Ring& ring = rings_[static_cast<std::size_t>(r)];
    const auto n = ring.phi.size();
    const auto pos = static_cast<std::size_t>(std::lower_bound(ring.phi.begin(), ring.phi.end(), phi) - ring.phi.begin());
    for (std::size_t k : {pos + n - 1, pos, pos + 1}) {
      const std::size_t idx = k % n;
      const double d = healpix::angular_distance(q, {ring.theta, ring.phi[idx]});
      if (d < best) {
        best = d;
        best_pixel = ring.pixels[idx];
      }
    }
  }
  return best_pixel;
}

double Raster::lon(std::size_t col) const {
  return -180.0 + (static_cast<double>(col) + 0.5) * 360.0 / static_cast<double>(width);
}

double Raster::lat(std::size_t row) const {
  return 90.0 - (static_cast<double>(row) + 0.5) * 180.0 / static_cast<double>(height);
}

Raster rasterize(const HealpixField& field, std::size_t width, std::size_t height, std::size_t channel) {
  if (width == 0 || height == 0) throw std::invalid_argument("raster size must be positive");
  if (channel >= field.channels) throw std::invalid_argument("channel out of range");
  const NearestPixel lookup(field.zoom);
  Raster r{width, height, std::vector<double>(width * height)};
  constexpr double kDeg = std::numbers::pi / 180.0;
  for (std::size_t row = 0; row < height; ++row) {
    const double theta = (90.0 - r.lat(row)) * kDeg;
    for (std::size_t col = 0; col < width; ++col) {
      double phi = r.lon(col) * kDeg;
      if (phi < 0.0) phi += 2.0 * std::numbers::pi;
      const auto p = static_cast<std::size_t>(lookup.find(theta, phi));
      r.values[row * width + col] = field.values[p * field.channels + channel];
    }
  }
  return r;
}

std::vector<std::uint8_t> to_gray(const Raster& r) {
  const auto [lo, hi] = std::minmax_element(r.values.begin(), r.values.end());
  std::vector<std::uint8_t> out(r.values.size(), 128);
  if (lo == r.values.end() || !(*hi > *lo)) return out;
  const double span = *hi - *lo;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(255.0 * (r.values[i] - *lo) / span));
  }
  return out;
}

void write_pgm(const std::string& path, const Raster& r) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P5\n" << r.width << " " << r.height << "\n255\n";
  const auto gray = to_gray(r);
  f.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
}

void write_raster_csv(const std::string& path, const Raster& r) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "lon,lat,value\n";
  for (std::size_t row = 0; row < r.height; ++row) {
    for (std::size_t col = 0; col < r.width; ++col) {
      f << format_double(r.lon(col)) << ',' << format_double(r.lat(row)) << ','
        << format_double(r.values[row * r.width + col]) << '\n';
    }
  }
}

}  // namespace fst
