// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fst/field_file.hpp"

namespace fst {

/// Nearest-pixel lookup over the iso-latitude rings of one zoom level.
class NearestPixel {
 public:
  explicit NearestPixel(int zoom);
  [[nodiscard]] std::int64_t find(double theta, double phi) const;

 private:
  struct Ring {
    double theta;
    std::vector<double> phi;            // sorted
    std::vector<std::int64_t> pixels;   // same order as phi
  };
  int zoom_;
  std::vector<Ring> rings_;  // north to south
};

/// Equirectangular raster: row 0 is the north edge, column 0 is longitude -180.
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;  // row-major
  [[nodiscard]] double lon(std::size_t col) const;
  [[nodiscard]] double lat(std::size_t row) const;
};

Raster rasterize(const HealpixField& field, std::size_t width = 360, std::size_t height = 180,
                 std::size_t channel = 0);

/// Min-max scaled to 8 bits; a constant raster maps to mid-grey.
std::vector<std::uint8_t> to_gray(const Raster& r);

void write_pgm(const std::string& path, const Raster& r);
void write_raster_csv(const std::string& path, const Raster& r);

}  // namespace fst
