#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>

#include "fst/dataset.hpp"
#include "fst/field_file.hpp"
#include "fst/healpix.hpp"
#include "fst/multiscale.hpp"
#include "fst/synthetic.hpp"
#include "test_util.hpp"

using namespace fst;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "fst_test_data";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void dump(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

FieldFileError::Kind read_error(const fs::path& p) {
  try {
    read_field(p.string());
  } catch (const FieldFileError& e) {
    return e.kind();
  }
  FAIL("read_field accepted a bad file");
  return FieldFileError::Kind::Io;
}

template <class T>
void poke(std::string& bytes, std::size_t offset, T value) {
  std::memcpy(bytes.data() + offset, &value, sizeof(T));  // test host is little-endian
}

}  // namespace

TEST_CASE("synthetic fields") {
  SynthFieldParams p;
  p.zoom = 4;
  p.seed = 3;
  const auto a = gen_synthetic_field(p);
  CHECK(a.zoom == 4);
  CHECK(a.values.size() == 3072);
  CHECK(gen_synthetic_field(p) == a);
  p.seed = 4;
  CHECK_FALSE(gen_synthetic_field(p) == a);

  for (std::uint64_t s = 0; s < 6; ++s) {
    SynthFieldParams q;
    q.seed = s;
    const auto f = gen_synthetic_field(q);
    for (double v : f.values) {
      REQUIRE(std::isfinite(v));
      CHECK(v > 220.0);
      CHECK(v < 310.0);
    }
  }

  SynthFieldParams flat;
  flat.zoom = 3;
  flat.base_amp = flat.season_amp = flat.noise_amp = flat.blob_amp = 0.0;
  flat.offset = 271.5;
  for (double v : gen_synthetic_field(flat).values) CHECK(v == 271.5);

  // Without blobs and with only the l = 0 noise term the field depends on latitude alone.
  SynthFieldParams zonal;
  zonal.zoom = 4;
  zonal.l_band = 0;
  zonal.n_blobs = 0;
  zonal.seed = 9;
  const auto z = gen_synthetic_field(zonal);
  std::map<std::int64_t, double> ring_value;
  for (std::int64_t px = 0; px < 3072; ++px) {
    const auto r = healpix::ring_of(4, px);
    const double v = z.values[static_cast<std::size_t>(px)];
    auto [it, fresh] = ring_value.emplace(r, v);
    if (!fresh) CHECK(std::abs(it->second - v) < 1e-12);
  }

  SynthFieldParams bad;
  bad.zoom = 2;
  bad.l_band = 40;
  CHECK_THROWS(gen_synthetic_field(bad));
  bad = {};
  bad.blob_sigma = 0.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
}

TEST_CASE("super-resolution pairs") {
  SynthFieldParams p;
  p.seed = 1;
  const auto hi = gen_synthetic_field(p);
  const auto pair = make_sr_pair(hi, 3);
  CHECK(pair.lo.zoom == 3);
  CHECK(hi.pixels() / pair.lo.pixels() == 64);
  CHECK(test::values(coarsen(hi.to_tensor(), 3)) == pair.lo.values);
  CHECK(pair.hi == hi);
  CHECK_THROWS(make_sr_pair(hi, 6));

  HealpixField k{5, 1, std::vector<double>(12288, 250.0)};
  const auto kp = make_sr_pair(k, 2);
  CHECK(kp.lo.values == std::vector<double>(192, 250.0));
  CHECK(test::values(upsample(kp.lo.to_tensor(), 5)) == k.values);
  CHECK(healpix::group_size(8 - 3) == 1024);
}

TEST_CASE("datasets") {
  SynthFieldParams p;
  p.zoom = 4;
  const SyntheticDataset ds(7, 5, 3, p, 2);
  CHECK(ds.size(Split::Train) == 5);
  CHECK(ds.size(Split::Val) == 3);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK_FALSE(ds.sample(Split::Train, i).hi == ds.sample(Split::Val, j).hi);
  CHECK_THROWS(ds.sample(Split::Val, 3));

  const auto b = ds.batch(Split::Train, 3, 4);
  CHECK(b.size() == 4);
  CHECK(b.lo.shape() == Shape{4, 192, 1});
  CHECK(b.hi.shape() == Shape{4, 3072, 1});
  const auto s0 = ds.sample(Split::Train, 0);
  CHECK(HealpixField::from_tensor(b.hi, 2) == s0.hi);  // wrapped around
  CHECK(HealpixField::from_tensor(b.lo, 2) == s0.lo);

  const SyntheticDataset again(7, 5, 3, p, 2);
  auto s1 = ds.stream(Split::Train, 2);
  auto s2 = again.stream(Split::Train, 2);
  std::vector<std::size_t> sizes;
  while (auto x = s1.next()) {
    auto y = s2.next();
    REQUIRE(y.has_value());
    CHECK(test::values(x->hi) == test::values(y->hi));
    sizes.push_back(x->size());
  }
  CHECK_FALSE(s2.next().has_value());
  CHECK(sizes == std::vector<std::size_t>{2, 2, 1});

  const SyntheticDataset empty(7, 0, 0, p, 2);
  CHECK_FALSE(empty.stream(Split::Train, 4).next().has_value());
  CHECK(empty.batch(Split::Val, 0, 3).size() == 0);
  CHECK_THROWS(ds.stream(Split::Train, 0));
  CHECK_THROWS(SyntheticDataset(1, 1, 1, p, 4));
}

TEST_CASE("field file roundtrip") {
  HealpixField f{3, 2, test::normal_vector(768 * 2, 5, 30.0)};
  const auto path = scratch("roundtrip.fsf");
  write_field(path.string(), f);
  CHECK(fs::file_size(path) == 4 + 4 + 4 + 8 + 768 * 2 * 4);
  const auto g = read_field(path.string());
  CHECK(g.zoom == 3);
  CHECK(g.channels == 2);
  for (std::size_t i = 0; i < f.values.size(); ++i) CHECK(g.values[i] == static_cast<double>(static_cast<float>(f.values[i])));
  const auto again = scratch("roundtrip2.fsf");
  write_field(again.string(), g);
  CHECK(slurp(path) == slurp(again));
  CHECK(slurp(path).substr(0, 4) == "FSF1");

  CHECK_THROWS_AS(write_field(path.string(), HealpixField{3, 1, std::vector<double>(10)}), FieldFileError);
}

TEST_CASE("field file validation") {
  const auto good = scratch("good.fsf");
  write_field(good.string(), HealpixField{1, 1, std::vector<double>(48, 1.0)});
  const std::string bytes = slurp(good);
  const auto bad = scratch("bad.fsf");

  std::string b = bytes;
  b[0] = 'X';
  dump(bad, b);
  CHECK(read_error(bad) == FieldFileError::Kind::BadMagic);

  b = bytes;
  poke<std::uint64_t>(b, 12, 47);
  dump(bad, b);
  CHECK(read_error(bad) == FieldFileError::Kind::InconsistentHeader);

  b = bytes;
  poke<std::uint32_t>(b, 8, 0);
  dump(bad, b);
  CHECK(read_error(bad) == FieldFileError::Kind::InconsistentHeader);

  dump(bad, bytes.substr(0, bytes.size() - 1));
  CHECK(read_error(bad) == FieldFileError::Kind::Truncated);
  dump(bad, bytes.substr(0, 10));
  CHECK(read_error(bad) == FieldFileError::Kind::Truncated);

  // A huge but self-consistent header must fail before allocating.
  b = bytes;
  poke<std::uint32_t>(b, 4, 29);
  poke<std::uint32_t>(b, 8, 1u << 16);
  poke<std::uint64_t>(b, 12, static_cast<std::uint64_t>(healpix::n_pixels(29)));
  dump(bad, b);
  CHECK(read_error(bad) == FieldFileError::Kind::Truncated);

  CHECK(read_error(scratch("missing.fsf")) == FieldFileError::Kind::Io);
}
