// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "fst/tensor.hpp"

namespace fst {

/// A single field on the nested HEALPix grid, channel-minor.
struct HealpixField {
  int zoom = 0;
  std::size_t channels = 1;
  std::vector<double> values;

  [[nodiscard]] std::size_t pixels() const { return channels == 0 ? 0 : values.size() / channels; }
  /// [1, N_pix, C]
  [[nodiscard]] Tensor to_tensor() const;
  /// Takes batch element `b` of a [B, N, C] tensor.
  static HealpixField from_tensor(const Tensor& t, std::size_t b = 0);

  friend bool operator==(const HealpixField&, const HealpixField&) = default;
};

/// Stacks equally shaped fields into [B, N, C].
Tensor stack_fields(const std::vector<HealpixField>& fields);

class FieldFileError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, Truncated, InconsistentHeader, Io };
  FieldFileError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Payload is stored as little-endian 32-bit floats; values are rounded on write.
void write_field(const std::string& path, const HealpixField& field);
/// Promotes the payload to double.
HealpixField read_field(const std::string& path);

}  // namespace fst
