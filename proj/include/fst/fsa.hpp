// SPDX-License-Identifier: Apache-2.0
//
// Field-Space Attention block. Pyramid levels are regrouped onto the pixels
// of the attention zoom (the 4^(z - z_A) descendants of a token pixel become
// consecutive features), normalized and modulated by positional embeddings,
// and the attention and MLP sublayers each add a residual update back onto
// the query levels of the pyramid.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fst/multiscale.hpp"
#include "fst/tensor.hpp"

namespace fst {

struct TokenSpec {
  int attn_zoom = 0;
  std::vector<int> q_zooms;
  std::vector<int> kv_zooms;
};

/// Feature width of the tokens built from `zooms`: channels * sum 4^(z - attn_zoom).
std::size_t token_channels(int attn_zoom, const std::vector<int>& zooms,
                           std::size_t field_channels = 1);

/// [B, N_pix(attn_zoom), C_sel] tokens from the listed levels, ascending zoom.
Tensor tokenize(const FieldPyramid& p, int attn_zoom, const std::vector<int>& zooms);

/// Inverse of tokenize: one [B, N_pix(z), channels] field per listed zoom,
/// ascending.
std::vector<Tensor> detokenize(const Tensor& tokens, int attn_zoom, const std::vector<int>& zooms,
                               std::size_t field_channels = 1);

/// Adds per-zoom deltas (ascending, as returned by detokenize) onto the
/// matching levels. Other levels are shared unchanged.
FieldPyramid add_to_levels(const FieldPyramid& p, const std::vector<int>& zooms,
                           const std::vector<Tensor>& deltas);

struct BlockDims {
  std::size_t q_channels = 0;
  std::size_t kv_channels = 0;
  std::size_t dim = 0;
  std::size_t heads = 1;
  std::size_t mlp_hidden = 0;
  std::size_t embed = 0;
};

/// Learned weights of one block. Projections act on the right: Q = X * w_q.
struct FSABlockParams {
  Tensor w_q;  // [C_q, D]
  Tensor w_k;  // [C_kv, D]
  Tensor w_v;  // [C_kv, D]
  Tensor w_o;  // [D, C_q]
  Tensor w1;   // [C_q, D_mlp]
  Tensor b1;   // [D_mlp]
  Tensor w2;   // [D_mlp, C_q]
  Tensor b2;   // [C_q]
  Tensor gamma_q;   // [E, C_q]
  Tensor beta_q;    // [E, C_q]
  Tensor gamma_kv;  // [E, C_kv]
  Tensor beta_kv;   // [E, C_kv]
  std::size_t heads = 1;

  /// Uniform(+-1/sqrt(fan_in)) for w_q, w_k, w_v and w1; zeros elsewhere, so
  /// a fresh block is the identity map.
  static FSABlockParams init(const BlockDims& dims, std::mt19937_64& rng);

  [[nodiscard]] BlockDims dims() const;
  [[nodiscard]] std::vector<std::pair<std::string, Tensor>> named() const;
};

/// (1 + emb*gamma) * layer_norm(x) + emb*beta, broadcast over the batch.
Tensor film_modulate(const Tensor& x, const Tensor& emb, const Tensor& gamma, const Tensor& beta);

/// W_O applied to multi-head scaled dot-product attention of the (already
/// normalized) query and key/value tokens. If `weights` is non-null the
/// per-head attention matrices [B, N, N] are appended to it.
Tensor attention_update(const Tensor& xq, const Tensor& xkv, const FSABlockParams& params,
                        std::vector<Tensor>* weights = nullptr);

/// xq + attention_update(xq, xkv).
Tensor multi_head_attention(const Tensor& xq, const Tensor& xkv, const FSABlockParams& params);

/// gelu(x * w1 + b1) * w2 + b2.
Tensor mlp_update(const Tensor& x, const FSABlockParams& params);

/// One pre-norm block: attention sublayer then MLP sublayer, each adding its
/// update to the query levels. Levels outside spec.q_zooms are returned as is.
FieldPyramid fsa_block_forward(const FieldPyramid& p, const FSABlockParams& params,
                               const TokenSpec& spec, const Tensor& embedding);

}  // namespace fst
