// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fst/fsa.hpp"
#include "fst/multiscale.hpp"
#include "fst/tensor.hpp"

namespace fst {

struct FSTConfig {
  std::vector<int> zooms{3, 5, 6};
  int attn_zoom = 3;
  /// Zoom of the model input; -1 means zooms.front(). May lie below
  /// zooms.front(), in which case the input is upsampled onto the coarsest level.
  int input_zoom = -1;
  std::size_t layers = 3;
  std::size_t dim = 32;
  /// 0 selects max(1, dim / 32).
  std::size_t heads = 0;
  std::size_t mlp_ratio = 4;
  std::size_t embed_dim = 64;
  bool sc_per_block = false;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t resolved_heads() const;
  [[nodiscard]] int resolved_input_zoom() const;
  /// Levels taking part in attention: every listed zoom >= attn_zoom.
  [[nodiscard]] std::vector<int> token_zooms() const;
  [[nodiscard]] TokenSpec token_spec() const;
  [[nodiscard]] BlockDims block_dims() const;
  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;

  friend bool operator==(const FSTConfig&, const FSTConfig&) = default;
};

/// Closed-form number of learnable scalars for `cfg`.
std::size_t param_count(const FSTConfig& cfg);

struct ForwardResult {
  Tensor output;                        // [B, N_pix(z_in), 1]
  FieldPyramid final_pyramid;           // after the final scale-constraining layer
  std::vector<FieldPyramid> snapshots;  // state after each block, when requested
};

class FSTModel {
 public:
  explicit FSTModel(FSTConfig cfg);

  [[nodiscard]] const FSTConfig& config() const { return cfg_; }
  [[nodiscard]] const std::vector<FSABlockParams>& blocks() const { return blocks_; }
  [[nodiscard]] std::vector<FSABlockParams>& blocks() { return blocks_; }
  [[nodiscard]] const Tensor& embedding() const { return embedding_; }
  [[nodiscard]] Tensor& embedding() { return embedding_; }

  /// Stable order: "embedding", then "block<i>.<name>" for each block.
  [[nodiscard]] std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  [[nodiscard]] std::size_t parameter_count() const;
  void zero_grad();

  /// Coarse level from the input, every residual level zero.
  [[nodiscard]] FieldPyramid init_pyramid(const Tensor& input) const;

  [[nodiscard]] ForwardResult forward(const Tensor& input, bool keep_snapshots = false) const;

 private:
  FSTConfig cfg_;
  std::vector<FSABlockParams> blocks_;
  Tensor embedding_;
};

/// Overwrites every parameter with U(-scale, scale) draws; used to test
/// trained-like states without training.
void randomize_parameters(FSTModel& model, double scale, std::uint64_t seed);

/// Plain-loop pre-norm transformer layer on [B, N, C] tokens (row-major),
/// sharing the weights of `params` and the positional table `embedding`
/// ([N, E]). Independent of the tensor engine; kept as the oracle for the
/// single-zoom limit of fsa_block_forward.
std::vector<double> single_scale_reference_layer(const std::vector<double>& tokens,
                                                 std::size_t batch, std::size_t n_tokens,
                                                 const FSABlockParams& params,
                                                 const Tensor& embedding,
                                                 std::vector<std::vector<double>>* attention = nullptr);

}  // namespace fst
