// SPDX-License-Identifier: Apache-2.0
#include "fst/synthetic.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>

#include "fst/healpix.hpp"
#include "fst/sph_harm.hpp"

namespace fst {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// The standard distributions are implementation-defined; these are not, so
// fields match across standard libraries.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double standard_normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Geometry shared by every field at one zoom and band limit.
struct Basis {
  std::vector<double> theta;
  std::vector<double> phi;
  std::vector<double> unit;              // xyz per pixel
  std::vector<std::int64_t> ring;        // ring index per pixel
  std::vector<std::vector<double>> plm;  // normalized Legendre per ring
};

const Basis& basis_for(int zoom, int lmax) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, Basis> cache;
  std::lock_guard lock(mu);
  auto [it, inserted] = cache.try_emplace({zoom, lmax});
  if (!inserted) return it->second;
  Basis& b = it->second;
  const auto n = static_cast<std::size_t>(healpix::n_pixels(zoom));
  b.theta.resize(n);
  b.phi.resize(n);
  b.unit.resize(3 * n);
  b.ring.resize(n);
  b.plm.resize(static_cast<std::size_t>(4 * healpix::n_side(zoom) - 1));
  for (std::size_t p = 0; p < n; ++p) {
    const auto c = healpix::pixel_center(zoom, static_cast<std::int64_t>(p));
    b.theta[p] = c.theta;
    b.phi[p] = c.phi;
    b.unit[3 * p] = std::sin(c.theta) * std::cos(c.phi);
    b.unit[3 * p + 1] = std::sin(c.theta) * std::sin(c.phi);
    b.unit[3 * p + 2] = std::cos(c.theta);
    const auto r = healpix::ring_of(zoom, static_cast<std::int64_t>(p)) - 1;
    b.ring[p] = r;
    auto& row = b.plm[static_cast<std::size_t>(r)];
    if (row.empty()) normalized_legendre(lmax, c.theta, row);
  }
  return b;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

void SynthFieldParams::validate() const {
  healpix::check_zoom(zoom);
  if (l_band < 0 || l_band > nyquist_lmax(zoom)) {
    throw std::invalid_argument("l_band must lie in [0, " + std::to_string(nyquist_lmax(zoom)) + "]");
  }
  if (!(blob_sigma > 0.0)) throw std::invalid_argument("blob width must be positive");
  if (!(half_range > 0.0)) throw std::invalid_argument("half_range must be positive");
}

HealpixField gen_synthetic_field(const SynthFieldParams& params) {
  params.validate();
  const Basis& b = basis_for(params.zoom, params.l_band);
  std::mt19937_64 rng(params.seed);

  const double tilt = 2.0 * uniform01(rng) - 1.0;

  // Harmonic coefficients with a 1/(l+1) spectrum, scaled so the noise has
  // spherical RMS noise_amp.
  const int L = params.l_band;
  std::vector<double> cos_coef(legendre_index(L, L) + 1, 0.0);
  std::vector<double> sin_coef(cos_coef.size(), 0.0);
  double variance = 0.0;
  for (int l = 0; l <= L; ++l) {
    const double w = 1.0 / (l + 1.0);
    variance += w * w * (2.0 * l + 1.0) / (4.0 * std::numbers::pi);
    for (int m = 0; m <= l; ++m) {
      cos_coef[legendre_index(l, m)] = w * standard_normal(rng) * (m > 0 ? std::numbers::sqrt2 : 1.0);
      if (m > 0) sin_coef[legendre_index(l, m)] = w * standard_normal(rng) * std::numbers::sqrt2;
    }
  }
  const double noise_scale = params.noise_amp / std::sqrt(variance);

  struct Blob {
    double x, y, z, amp;
  };
  std::vector<Blob> blobs;
  for (std::size_t i = 0; i < params.n_blobs; ++i) {
    const double cz = 2.0 * uniform01(rng) - 1.0;
    const double ph = 2.0 * std::numbers::pi * uniform01(rng);
    const double s = std::sqrt(std::max(0.0, 1.0 - cz * cz));
    const double amp = params.blob_amp * (2.0 * uniform01(rng) - 1.0);
    blobs.push_back({s * std::cos(ph), s * std::sin(ph), cz, amp});
  }
  const double cutoff = 4.0 * params.blob_sigma;
  const double cos_cutoff = cutoff < std::numbers::pi ? std::cos(cutoff) : -1.0;

  HealpixField f;
  f.zoom = params.zoom;
  f.channels = 1;
  f.values.resize(b.theta.size());
  std::vector<double> cos_m(static_cast<std::size_t>(L) + 1);
  std::vector<double> sin_m(cos_m.size());
  for (std::size_t p = 0; p < f.values.size(); ++p) {
    const double ct = b.unit[3 * p + 2];
    double raw = params.base_amp * (1.0 / 3.0 - ct * ct) + params.season_amp * tilt * ct;

    if (params.noise_amp != 0.0) {
      const auto& plm = b.plm[static_cast<std::size_t>(b.ring[p])];
      for (int m = 0; m <= L; ++m) {
        cos_m[m] = std::cos(m * b.phi[p]);
        sin_m[m] = std::sin(m * b.phi[p]);
      }
      double noise = 0.0;
      for (int l = 0; l <= L; ++l) {
        for (int m = 0; m <= l; ++m) {
          const auto k = legendre_index(l, m);
          noise += plm[k] * (cos_coef[k] * cos_m[m] + sin_coef[k] * sin_m[m]);
        }
      }
      raw += noise_scale * noise;
    }

    for (const auto& bl : blobs) {
      const double dot = bl.x * b.unit[3 * p] + bl.y * b.unit[3 * p + 1] + bl.z * ct;
      if (dot < cos_cutoff) continue;
      const double d = std::acos(std::clamp(dot, -1.0, 1.0));
      raw += bl.amp * std::exp(-d * d / (2.0 * params.blob_sigma * params.blob_sigma));
    }
    f.values[p] = params.offset + params.half_range * std::tanh(raw / params.half_range);
  }
  return f;
}

}  // namespace fst
