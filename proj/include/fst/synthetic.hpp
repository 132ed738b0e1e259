// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "fst/field_file.hpp"

namespace fst {

/// Temperature-like test fields: a latitudinal profile with a random
/// hemispheric tilt, band-limited harmonic noise and Gaussian blobs, squashed
/// into (offset - half_range, offset + half_range).
struct SynthFieldParams {
  int zoom = 6;
  int l_band = 12;
  std::size_t n_blobs = 8;
  double blob_sigma = 0.12;  // radians
  double base_amp = 40.0;
  double season_amp = 10.0;
  double noise_amp = 6.0;
  double blob_amp = 10.0;
  double offset = 265.0;
  double half_range = 45.0;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument.
  void validate() const;
};

HealpixField gen_synthetic_field(const SynthFieldParams& params);

/// Counter-based seed derivation: independent streams for any (seed, stream, index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace fst
