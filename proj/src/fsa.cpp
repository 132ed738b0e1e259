// SPDX-License-Identifier: Apache-2.0
#include "fst/fsa.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fst/healpix.hpp"
#include "fst/ops.hpp"

namespace fst {
namespace {

std::vector<int> sorted_unique(std::vector<int> zooms) {
  std::sort(zooms.begin(), zooms.end());
  zooms.erase(std::unique(zooms.begin(), zooms.end()), zooms.end());
  return zooms;
}

void check_token_zoom(int attn_zoom, int z) {
  if (z < attn_zoom) {
    throw std::invalid_argument("zoom " + std::to_string(z) + " lies below the attention zoom " +
                                std::to_string(attn_zoom));
  }
}

Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from_data(std::move(shape), std::move(v), true);
}

}  // namespace

std::size_t token_channels(int attn_zoom, const std::vector<int>& zooms,
                           std::size_t field_channels) {
  std::size_t c = 0;
  for (int z : sorted_unique(zooms)) {
    check_token_zoom(attn_zoom, z);
    c += static_cast<std::size_t>(healpix::group_size(z - attn_zoom));
  }
  return c * field_channels;
}

Tensor tokenize(const FieldPyramid& p, int attn_zoom, const std::vector<int>& zooms) {
  const auto sel = sorted_unique(zooms);
  if (sel.empty()) throw std::invalid_argument("tokenize: empty zoom selection");
  const auto tokens = static_cast<std::size_t>(healpix::n_pixels(attn_zoom));
  std::vector<Tensor> parts;
  for (int z : sel) {
    check_token_zoom(attn_zoom, z);
    const Tensor& lv = p.level(z);
    const std::size_t g = static_cast<std::size_t>(healpix::group_size(z - attn_zoom));
    parts.push_back(reshape(lv, {lv.dim(0), tokens, g * lv.dim(2)}));
  }
  return parts.size() == 1 ? parts[0] : concat_last(parts);
}

std::vector<Tensor> detokenize(const Tensor& tokens, int attn_zoom, const std::vector<int>& zooms,
                               std::size_t field_channels) {
  const auto sel = sorted_unique(zooms);
  const std::size_t expected = token_channels(attn_zoom, sel, field_channels);
  if (tokens.rank() != 3 || tokens.dim(2) != expected ||
      tokens.dim(1) != static_cast<std::size_t>(healpix::n_pixels(attn_zoom))) {
    throw std::invalid_argument("detokenize: tokens " + shape_string(tokens.shape()) +
                                " do not match " + std::to_string(expected) + " channels at zoom " +
                                std::to_string(attn_zoom));
  }
  std::vector<Tensor> out;
  std::size_t offset = 0;
  for (int z : sel) {
    const std::size_t width =
        static_cast<std::size_t>(healpix::group_size(z - attn_zoom)) * field_channels;
    Tensor part = sel.size() == 1 ? tokens : slice_last(tokens, offset, offset + width);
    out.push_back(reshape(part, {tokens.dim(0), static_cast<std::size_t>(healpix::n_pixels(z)),
                                 field_channels}));
    offset += width;
  }
  return out;
}

FieldPyramid add_to_levels(const FieldPyramid& p, const std::vector<int>& zooms,
                           const std::vector<Tensor>& deltas) {
  const auto sel = sorted_unique(zooms);
  if (sel.size() != deltas.size()) throw std::invalid_argument("add_to_levels: count mismatch");
  FieldPyramid out = p;
  for (std::size_t i = 0; i < sel.size(); ++i) {
    const std::size_t li = out.index_of(sel[i]);
    out.levels[li] = add(out.levels[li], deltas[i]);
  }
  return out;
}

FSABlockParams FSABlockParams::init(const BlockDims& d, std::mt19937_64& rng) {
  if (d.heads == 0 || d.dim % d.heads != 0) {
    throw std::invalid_argument("model width " + std::to_string(d.dim) +
                                " is not divisible by head count " + std::to_string(d.heads));
  }
  const auto bound = [](std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
  FSABlockParams p;
  p.heads = d.heads;
  p.w_q = uniform({d.q_channels, d.dim}, bound(d.q_channels), rng);
  p.w_k = uniform({d.kv_channels, d.dim}, bound(d.kv_channels), rng);
  p.w_v = uniform({d.kv_channels, d.dim}, bound(d.kv_channels), rng);
  p.w_o = Tensor::zeros({d.dim, d.q_channels}, true);
  p.w1 = uniform({d.q_channels, d.mlp_hidden}, bound(d.q_channels), rng);
  p.b1 = Tensor::zeros({d.mlp_hidden}, true);
  p.w2 = Tensor::zeros({d.mlp_hidden, d.q_channels}, true);
  p.b2 = Tensor::zeros({d.q_channels}, true);
  p.gamma_q = Tensor::zeros({d.embed, d.q_channels}, true);
  p.beta_q = Tensor::zeros({d.embed, d.q_channels}, true);
  p.gamma_kv = Tensor::zeros({d.embed, d.kv_channels}, true);
  p.beta_kv = Tensor::zeros({d.embed, d.kv_channels}, true);
  return p;
}

BlockDims FSABlockParams::dims() const {
  return {w_q.dim(0), w_k.dim(0), w_q.dim(1), heads, w1.dim(1), gamma_q.dim(0)};
}

std::vector<std::pair<std::string, Tensor>> FSABlockParams::named() const {
  return {{"w_q", w_q},         {"w_k", w_k},       {"w_v", w_v},
          {"w_o", w_o},         {"w1", w1},         {"b1", b1},
          {"w2", w2},           {"b2", b2},         {"gamma_q", gamma_q},
          {"beta_q", beta_q},   {"gamma_kv", gamma_kv}, {"beta_kv", beta_kv}};
}

Tensor film_modulate(const Tensor& x, const Tensor& emb, const Tensor& gamma, const Tensor& beta) {
  const Tensor xn = layer_norm(x);
  const Tensor g = matmul(emb, gamma);
  const Tensor b = matmul(emb, beta);
  return add(add(xn, mul(xn, g)), b);
}

Tensor attention_update(const Tensor& xq, const Tensor& xkv, const FSABlockParams& params,
                        std::vector<Tensor>* weights) {
  const Tensor q = matmul(xq, params.w_q);
  const Tensor k = matmul(xkv, params.w_k);
  const Tensor v = matmul(xkv, params.w_v);
  const std::size_t width = q.dim(-1);
  const std::size_t heads = params.heads;
  if (heads == 0 || width % heads != 0) throw std::invalid_argument("head count does not divide width");
  const std::size_t d = width / heads;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<Tensor> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    const auto head = [&](const Tensor& t) {
      return heads == 1 ? t : slice_last(t, h * d, (h + 1) * d);
    };
    Tensor probs;
    outs.push_back(scaled_dot_attention(head(q), head(k), head(v), inv_sqrt_d,
                                        weights != nullptr ? &probs : nullptr));
    if (weights != nullptr) weights->push_back(probs);
  }
  const Tensor merged = heads == 1 ? outs[0] : concat_last(outs);
  return matmul(merged, params.w_o);
}

Tensor multi_head_attention(const Tensor& xq, const Tensor& xkv, const FSABlockParams& params) {
  return add(xq, attention_update(xq, xkv, params));
}

Tensor mlp_update(const Tensor& x, const FSABlockParams& params) {
  const Tensor hidden = gelu(add(matmul(x, params.w1), params.b1));
  return add(matmul(hidden, params.w2), params.b2);
}

FieldPyramid fsa_block_forward(const FieldPyramid& p, const FSABlockParams& params,
                               const TokenSpec& spec, const Tensor& embedding) {
  const int za = spec.attn_zoom;
  const std::size_t field_channels = p.levels[0].dim(2);

  const Tensor xq = tokenize(p, za, spec.q_zooms);
  const Tensor xkv = tokenize(p, za, spec.kv_zooms);
  const Tensor q_mod = film_modulate(xq, embedding, params.gamma_q, params.beta_q);
  const Tensor kv_mod = film_modulate(xkv, embedding, params.gamma_kv, params.beta_kv);
  const Tensor attn_delta = attention_update(q_mod, kv_mod, params);
  const FieldPyramid mid =
      add_to_levels(p, spec.q_zooms, detokenize(attn_delta, za, spec.q_zooms, field_channels));

  // The MLP sublayer reuses the query-path modulation.
  const Tensor xq2 = tokenize(mid, za, spec.q_zooms);
  const Tensor mlp_delta =
      mlp_update(film_modulate(xq2, embedding, params.gamma_q, params.beta_q), params);
  return add_to_levels(mid, spec.q_zooms, detokenize(mlp_delta, za, spec.q_zooms, field_channels));
}

}  // namespace fst
