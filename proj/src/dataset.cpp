// SPDX-License-Identifier: Apache-2.0
#include "fst/dataset.hpp"

#include <algorithm>
#include <stdexcept>

#include "fst/multiscale.hpp"

namespace fst {

namespace {

constexpr std::uint64_t kTrainStream = 0x7472'6169'6eull;
constexpr std::uint64_t kValStream = 0x7661'6cull;

}  // namespace

SRPair make_sr_pair(const HealpixField& hi, int z_low) {
  if (z_low >= hi.zoom) throw std::invalid_argument("make_sr_pair needs z_low below the field zoom");
  return {HealpixField::from_tensor(coarsen(hi.to_tensor(), z_low)), hi};
}

Batch make_batch(const std::vector<SRPair>& pairs) {
  std::vector<HealpixField> lo;
  std::vector<HealpixField> hi;
  for (const auto& p : pairs) {
    lo.push_back(p.lo);
    hi.push_back(p.hi);
  }
  return {stack_fields(lo), stack_fields(hi)};
}

SyntheticDataset::SyntheticDataset(std::uint64_t seed, std::size_t n_train, std::size_t n_val,
                                   SynthFieldParams params, int z_low)
    : seed_(seed), n_train_(n_train), n_val_(n_val), params_(params), z_low_(z_low) {
  params_.validate();
  if (z_low_ < 0 || z_low_ >= params_.zoom) throw std::invalid_argument("z_low must lie below the field zoom");
}

SRPair SyntheticDataset::sample(Split split, std::size_t index) const {
  if (index >= size(split)) throw std::out_of_range("sample index past the end of the split");
  SynthFieldParams p = params_;
  p.seed = derive_seed(seed_, split == Split::Train ? kTrainStream : kValStream, index);
  return make_sr_pair(gen_synthetic_field(p), z_low_);
}

Batch SyntheticDataset::batch(Split split, std::size_t first, std::size_t count) const {
  const std::size_t n = size(split);
  if (n == 0 || count == 0) return {};
  std::vector<SRPair> pairs;
  pairs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) pairs.push_back(sample(split, (first + i) % n));
  return make_batch(pairs);
}

SyntheticDataset::Stream::Stream(const SyntheticDataset& ds, Split split, std::size_t batch_size)
    : ds_(&ds), split_(split), batch_size_(batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
}

std::optional<Batch> SyntheticDataset::Stream::next() {
  const std::size_t n = ds_->size(split_);
  if (pos_ >= n) return std::nullopt;
  const std::size_t count = std::min(batch_size_, n - pos_);
  Batch b = ds_->batch(split_, pos_, count);
  pos_ += count;
  return b;
}

}  // namespace fst
