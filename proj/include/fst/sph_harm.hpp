// SPDX-License-Identifier: Apache-2.0
//
// Real spherical harmonics built on the orthonormal complex Y_l^m with the
// Condon-Shortley phase:
//   m > 0:  sqrt(2) Re Y_l^|m|     m = 0:  Y_l^0     m < 0:  sqrt(2) Im Y_l^|m|
#pragma once

#include <cstdint>
#include <vector>

#include "fst/tensor.hpp"

namespace fst {

struct HarmonicIndex {
  int l = 0;
  int m = 0;
};

/// Highest degree resolved at zoom z: max(1, floor(pi / (2 dtheta))).
int nyquist_lmax(int z);

/// Throws std::invalid_argument if |m| > l or l < 0.
double real_sph_harm(int l, int m, double theta, double phi);

/// Orthonormalized associated Legendre values P̄_l^m(cos theta) for
/// 0 <= m <= l <= lmax, stored at index l*(l+1)/2 + m. Includes the
/// Condon-Shortley phase and the 1/sqrt(4 pi) normalization.
void normalized_legendre(int lmax, double theta, std::vector<double>& out);

inline std::size_t legendre_index(int l, int m) {
  return static_cast<std::size_t>(l) * static_cast<std::size_t>(l + 1) / 2 +
         static_cast<std::size_t>(m);
}

struct EmbeddingInit {
  Tensor table;  // [N_pix(zoom), width]
  std::vector<HarmonicIndex> modes;
};

/// Per-pixel embedding table whose column c holds Y_{l_c}^{m_c} at the pixel
/// centers, with l_c uniform in [1, l_max(zoom)] and m_c uniform in [-l_c, l_c].
EmbeddingInit sph_harm_embedding(int zoom, std::size_t width, std::uint64_t seed);

}  // namespace fst
