#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fst/healpix.hpp"
#include "fst/sph_harm.hpp"

using namespace fst;

TEST_CASE("nyquist lmax") {
  CHECK(nyquist_lmax(0) == 1);
  CHECK(nyquist_lmax(1) == 3);
  CHECK(nyquist_lmax(8) == 392);
  CHECK(healpix::mean_cell_diameter(0) == doctest::Approx(1.0233).epsilon(1e-4));
  CHECK(healpix::mean_cell_diameter(1) == doctest::Approx(0.5116).epsilon(1e-4));
  for (int z = 1; z < 12; ++z) CHECK(nyquist_lmax(z) >= nyquist_lmax(z - 1));
}

TEST_CASE("closed forms") {
  const double c0 = 0.5 / std::sqrt(std::numbers::pi);
  for (double t : {0.0, 0.4, 2.0, std::numbers::pi}) CHECK(real_sph_harm(0, 0, t, 1.3) == doctest::Approx(c0).epsilon(1e-15));
  CHECK(std::abs(real_sph_harm(1, 0, std::numbers::pi / 2, 0.7)) < 1e-16);
  CHECK(real_sph_harm(1, 0, 0.3, 0.0) ==
        doctest::Approx(std::sqrt(3.0 / (4.0 * std::numbers::pi)) * std::cos(0.3)).epsilon(1e-14));
  CHECK_THROWS_AS(real_sph_harm(2, 3, 0.1, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(real_sph_harm(-1, 0, 0.1, 0.1), std::invalid_argument);
}

TEST_CASE("values match an independent reference") {
  struct Row {
    int l, m;
    double theta, phi, value;
  };
  // Real form derived from a library complex Y_l^m.
  const Row rows[] = {
      {0, 0, 0.3, 1.0, 0.28209479177387814},    {1, 0, 0.7, 0.2, 0.3737038139165246},
      {1, 1, 0.7, 0.2, -0.30849200905878194},   {1, -1, 0.7, 0.2, -0.06253442611044739},
      {2, -2, 1.1, 2.5, -0.4160567224324072},   {3, 2, 2.0, 4.0, 0.07235713089300909},
      {5, -3, 0.4, 5.9, 0.1749421634731506},    {10, 7, 1.3, 0.8, 0.3579029161998516},
      {20, 0, 2.9, 0.0, -0.3499854603566638},   {40, -17, 0.9, 3.3, 0.1969025638540642},
  };
  for (const auto& r : rows) {
    CAPTURE(r.l);
    CAPTURE(r.m);
    CHECK(std::abs(real_sph_harm(r.l, r.m, r.theta, r.phi) - r.value) < 1e-12);
  }
}

TEST_CASE("legendre table agrees with the single evaluations") {
  std::vector<double> table;
  normalized_legendre(12, 0.9, table);
  CHECK(table.size() == legendre_index(12, 12) + 1);
  for (int l = 0; l <= 12; ++l) CHECK(table[legendre_index(l, 0)] == doctest::Approx(real_sph_harm(l, 0, 0.9, 0.0)).epsilon(1e-13));
}

TEST_CASE("quadrature orthonormality on the z=6 grid") {
  const int z = 6;
  const auto n = healpix::n_pixels(z);
  const double w = 4.0 * std::numbers::pi / static_cast<double>(n);
  const HarmonicIndex modes[] = {{1, 0}, {1, 1}, {2, -1}, {3, 2}, {4, -4}};
  for (const auto& a : modes) {
    for (const auto& b : modes) {
      double s = 0.0;
      for (std::int64_t p = 0; p < n; ++p) {
        const auto c = healpix::pixel_center(z, p);
        s += real_sph_harm(a.l, a.m, c.theta, c.phi) * real_sph_harm(b.l, b.m, c.theta, c.phi);
      }
      s *= w;
      const bool same = a.l == b.l && a.m == b.m;
      CHECK(std::abs(s - (same ? 1.0 : 0.0)) < 0.02);
    }
  }
}

TEST_CASE("spherical harmonic embedding") {
  const auto e = sph_harm_embedding(3, 64, 11);
  CHECK(e.table.shape() == Shape{768, 64});
  CHECK(e.modes.size() == 64);
  const auto again = sph_harm_embedding(3, 64, 11);
  CHECK(std::equal(e.table.data().begin(), e.table.data().end(), again.table.data().begin()));
  const auto other = sph_harm_embedding(3, 64, 12);
  CHECK_FALSE(std::equal(e.table.data().begin(), e.table.data().end(), other.table.data().begin()));
  const int lmax = nyquist_lmax(3);
  for (std::size_t c = 0; c < 64; ++c) {
    const auto [l, m] = e.modes[c];
    CHECK(l >= 1);
    CHECK(l <= lmax);
    CHECK(std::abs(m) <= l);
    double s = 0, ss = 0;
    for (std::size_t p = 0; p < 768; ++p) {
      const double v = e.table.data()[p * 64 + c];
      s += v;
      ss += v * v;
    }
    const double mean = s / 768;
    CHECK(std::abs(mean) < 5e-2);
    CHECK(ss / 768 - mean * mean > 0.0);
    const auto pc = healpix::pixel_center(3, 100);
    CHECK(std::abs(e.table.data()[100 * 64 + c] - real_sph_harm(l, m, pc.theta, pc.phi)) < 1e-13);
  }
  CHECK(e.table.requires_grad());
  CHECK(sph_harm_embedding(0, 5, 1).table.shape() == Shape{12, 5});
}
