// SPDX-License-Identifier: Apache-2.0
#include "fst/field_file.hpp"

#include <algorithm>
#include <fstream>

#include "binary_io.hpp"
#include "fst/healpix.hpp"

namespace fst {

namespace {

constexpr char kMagic[4] = {'F', 'S', 'F', '1'};
constexpr std::uint32_t kMaxChannels = 1u << 16;

}  // namespace

Tensor HealpixField::to_tensor() const {
  return Tensor::from_data({1, pixels(), channels}, values);
}

HealpixField HealpixField::from_tensor(const Tensor& t, std::size_t b) {
  if (t.rank() != 3 || b >= t.dim(0)) throw std::invalid_argument("from_tensor expects [B, N, C] and b < B");
  HealpixField f;
  f.zoom = healpix::zoom_for_pixel_count(static_cast<std::int64_t>(t.dim(1)));
  f.channels = t.dim(2);
  const std::size_t n = t.dim(1) * t.dim(2);
  f.values.assign(t.data().begin() + static_cast<std::ptrdiff_t>(b * n),
                  t.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * n));
  return f;
}

Tensor stack_fields(const std::vector<HealpixField>& fields) {
  if (fields.empty()) throw std::invalid_argument("stack_fields: no fields");
  std::vector<double> data;
  data.reserve(fields.size() * fields.front().values.size());
  for (const auto& f : fields) {
    if (f.zoom != fields.front().zoom || f.channels != fields.front().channels ||
        f.values.size() != fields.front().values.size()) {
      throw std::invalid_argument("stack_fields: mismatched fields");
    }
    data.insert(data.end(), f.values.begin(), f.values.end());
  }
  return Tensor::from_data({fields.size(), fields.front().pixels(), fields.front().channels}, std::move(data));
}

void write_field(const std::string& path, const HealpixField& field) {
  healpix::check_zoom(field.zoom);
  const auto count = static_cast<std::uint64_t>(healpix::n_pixels(field.zoom));
  if (field.values.size() != count * field.channels) {
    throw FieldFileError(FieldFileError::Kind::InconsistentHeader, "field size does not match its zoom");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FieldFileError(FieldFileError::Kind::Io, "cannot open " + path + " for writing");
  out.write(kMagic, 4);
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.zoom));
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.channels));
  binio::write_le<std::uint64_t>(out, count);
  for (double v : field.values) binio::write_le<float>(out, static_cast<float>(v));
  if (!out) throw FieldFileError(FieldFileError::Kind::Io, "write failed for " + path);
}

HealpixField read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FieldFileError(FieldFileError::Kind::Io, "cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4)) throw FieldFileError(FieldFileError::Kind::Truncated, path + ": truncated header");
  if (!std::equal(magic, magic + 4, kMagic)) throw FieldFileError(FieldFileError::Kind::BadMagic, path + ": bad magic");
  std::uint32_t zoom = 0;
  std::uint32_t channels = 0;
  std::uint64_t count = 0;
  if (!binio::read_le(in, zoom) || !binio::read_le(in, channels) || !binio::read_le(in, count)) {
    throw FieldFileError(FieldFileError::Kind::Truncated, path + ": truncated header");
  }
  if (zoom > static_cast<std::uint32_t>(healpix::kMaxZoom) || channels == 0 || channels > kMaxChannels ||
      count != static_cast<std::uint64_t>(healpix::n_pixels(static_cast<int>(zoom)))) {
    throw FieldFileError(FieldFileError::Kind::InconsistentHeader,
                         path + ": inconsistent header (zoom " + std::to_string(zoom) + ", count " +
                             std::to_string(count) + ")");
  }
  // Check the payload length before allocating it. Divide instead of
  // multiplying: count * channels * 4 overflows near the top zoom levels.
  const auto here = in.tellg();
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  if (here < 0 || end < 0 ||
      static_cast<std::uint64_t>(end - here) / sizeof(float) / channels < count) {
    throw FieldFileError(FieldFileError::Kind::Truncated, path + ": truncated payload");
  }
  HealpixField f;
  f.zoom = static_cast<int>(zoom);
  f.channels = channels;
  f.values.resize(count * channels);
  for (auto& v : f.values) {
    float x = 0.0f;
    if (!binio::read_le(in, x)) throw FieldFileError(FieldFileError::Kind::Truncated, path + ": truncated payload");
    v = x;
  }
  return f;
}

}  // namespace fst
