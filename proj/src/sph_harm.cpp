// SPDX-License-Identifier: Apache-2.0
#include "fst/sph_harm.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "fst/healpix.hpp"

namespace fst {

int nyquist_lmax(int z) {
  const double dtheta = healpix::mean_cell_diameter(z);
  const auto l_nyq = static_cast<int>(std::floor(std::numbers::pi / (2.0 * dtheta)));
  return std::max(1, l_nyq);
}

void normalized_legendre(int lmax, double theta, std::vector<double>& out) {
  if (lmax < 0) throw std::invalid_argument("negative lmax");
  out.assign(legendre_index(lmax, lmax) + 1, 0.0);
  const double x = std::cos(theta);
  const double s = std::sin(theta);
  double pmm = 1.0 / std::sqrt(4.0 * std::numbers::pi);
  for (int m = 0; m <= lmax; ++m) {
    if (m > 0) pmm *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
    out[legendre_index(m, m)] = pmm;
    if (m == lmax) break;
    double p_prev = pmm;
    double p_cur = std::sqrt(2.0 * m + 3.0) * x * pmm;
    out[legendre_index(m + 1, m)] = p_cur;
    for (int l = m + 2; l <= lmax; ++l) {
      const double ll = static_cast<double>(l) * l;
      const double mm = static_cast<double>(m) * m;
      const double a = std::sqrt((4.0 * ll - 1.0) / (ll - mm));
      const double lm1 = static_cast<double>(l - 1) * (l - 1);
      const double b = std::sqrt((lm1 - mm) / (4.0 * lm1 - 1.0));
      const double p_next = a * (x * p_cur - b * p_prev);
      out[legendre_index(l, m)] = p_next;
      p_prev = p_cur;
      p_cur = p_next;
    }
  }
}

double real_sph_harm(int l, int m, double theta, double phi) {
  if (l < 0 || std::abs(m) > l) {
    throw std::invalid_argument("spherical harmonic needs |m| <= l, got l=" + std::to_string(l) +
                                " m=" + std::to_string(m));
  }
  const int am = std::abs(m);
  // Recurrence in l at fixed |m| only.
  const double x = std::cos(theta);
  const double s = std::sin(theta);
  double pmm = 1.0 / std::sqrt(4.0 * std::numbers::pi);
  for (int k = 1; k <= am; ++k) pmm *= -std::sqrt((2.0 * k + 1.0) / (2.0 * k)) * s;
  double p = pmm;
  if (l > am) {
    double p_prev = pmm;
    double p_cur = std::sqrt(2.0 * am + 3.0) * x * pmm;
    for (int k = am + 2; k <= l; ++k) {
      const double kk = static_cast<double>(k) * k;
      const double mm = static_cast<double>(am) * am;
      const double km1 = static_cast<double>(k - 1) * (k - 1);
      const double a = std::sqrt((4.0 * kk - 1.0) / (kk - mm));
      const double b = std::sqrt((km1 - mm) / (4.0 * km1 - 1.0));
      const double p_next = a * (x * p_cur - b * p_prev);
      p_prev = p_cur;
      p_cur = p_next;
    }
    p = p_cur;
  }
  if (m > 0) return std::numbers::sqrt2 * p * std::cos(am * phi);
  if (m < 0) return std::numbers::sqrt2 * p * std::sin(am * phi);
  return p;
}

EmbeddingInit sph_harm_embedding(int zoom, std::size_t width, std::uint64_t seed) {
  if (width == 0) throw std::invalid_argument("embedding width must be positive");
  const int lmax = nyquist_lmax(zoom);
  const auto npix = static_cast<std::size_t>(healpix::n_pixels(zoom));
  std::mt19937_64 rng(seed);
  EmbeddingInit init;
  init.modes.reserve(width);
  for (std::size_t c = 0; c < width; ++c) {
    const int l = std::uniform_int_distribution<int>(1, lmax)(rng);
    const int m = std::uniform_int_distribution<int>(-l, l)(rng);
    init.modes.push_back({l, m});
  }
  std::vector<double> values(npix * width);
  for (std::size_t p = 0; p < npix; ++p) {
    const auto c = healpix::pixel_center(zoom, static_cast<std::int64_t>(p));
    for (std::size_t j = 0; j < width; ++j) {
      values[p * width + j] = real_sph_harm(init.modes[j].l, init.modes[j].m, c.theta, c.phi);
    }
  }
  init.table = Tensor::from_data({npix, width}, std::move(values), true);
  return init;
}

}  // namespace fst
