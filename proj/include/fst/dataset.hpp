// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>

#include "fst/field_file.hpp"
#include "fst/synthetic.hpp"
#include "fst/tensor.hpp"

namespace fst {

struct SRPair {
  HealpixField lo;
  HealpixField hi;
};

/// lo is the exact cell mean of hi at z_low.
SRPair make_sr_pair(const HealpixField& hi, int z_low);

struct Batch {
  Tensor lo;  // [B, N_pix(z_low), 1]
  Tensor hi;  // [B, N_pix(z_in), 1]
  [[nodiscard]] std::size_t size() const { return lo.defined() ? lo.dim(0) : 0; }
};

Batch make_batch(const std::vector<SRPair>& pairs);

enum class Split { Train, Val };

/// Synthetic super-resolution samples generated on demand. Sample i of a
/// split depends only on (seed, split, i).
class SyntheticDataset {
 public:
  SyntheticDataset(std::uint64_t seed, std::size_t n_train, std::size_t n_val, SynthFieldParams params,
                   int z_low);

  [[nodiscard]] std::size_t size(Split split) const { return split == Split::Train ? n_train_ : n_val_; }
  [[nodiscard]] int z_low() const { return z_low_; }
  [[nodiscard]] const SynthFieldParams& params() const { return params_; }

  [[nodiscard]] SRPair sample(Split split, std::size_t index) const;
  /// Samples [first, first + count), wrapping around the split.
  [[nodiscard]] Batch batch(Split split, std::size_t first, std::size_t count) const;

  /// Consecutive batches over one pass of a split; the last one may be short.
  class Stream {
   public:
    Stream(const SyntheticDataset& ds, Split split, std::size_t batch_size);
    std::optional<Batch> next();

   private:
    const SyntheticDataset* ds_;
    Split split_;
    std::size_t batch_size_;
    std::size_t pos_ = 0;
  };
  [[nodiscard]] Stream stream(Split split, std::size_t batch_size) const { return {*this, split, batch_size}; }

 private:
  std::uint64_t seed_;
  std::size_t n_train_;
  std::size_t n_val_;
  SynthFieldParams params_;
  int z_low_;
};

}  // namespace fst
