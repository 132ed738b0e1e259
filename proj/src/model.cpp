// SPDX-License-Identifier: Apache-2.0
#include "fst/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "fst/healpix.hpp"
#include "fst/ops.hpp"
#include "fst/sph_harm.hpp"

namespace fst {

std::size_t FSTConfig::resolved_heads() const {
  return heads != 0 ? heads : std::max<std::size_t>(1, dim / 32);
}

int FSTConfig::resolved_input_zoom() const {
  return input_zoom >= 0 ? input_zoom : (zooms.empty() ? 0 : zooms.front());
}

std::vector<int> FSTConfig::token_zooms() const {
  std::vector<int> z;
  std::copy_if(zooms.begin(), zooms.end(), std::back_inserter(z),
               [&](int v) { return v >= attn_zoom; });
  return z;
}

TokenSpec FSTConfig::token_spec() const { return {attn_zoom, token_zooms(), token_zooms()}; }

BlockDims FSTConfig::block_dims() const {
  const std::size_t c = token_channels(attn_zoom, token_zooms());
  return {c, c, dim, resolved_heads(), dim * mlp_ratio, embed_dim};
}

void FSTConfig::validate() const {
  validate_zoom_list(zooms);
  healpix::check_zoom(attn_zoom);
  if (token_zooms().empty()) throw std::invalid_argument("no zoom level at or above the attention zoom");
  const int in = resolved_input_zoom();
  if (in > zooms.front()) throw std::invalid_argument("input zoom finer than the coarsest level");
  if (layers == 0) throw std::invalid_argument("model needs at least one layer");
  if (dim == 0 || embed_dim == 0 || mlp_ratio == 0) throw std::invalid_argument("zero model width");
  if (dim % resolved_heads() != 0) throw std::invalid_argument("dim not divisible by head count");
}

std::size_t param_count(const FSTConfig& cfg) {
  const BlockDims d = cfg.block_dims();
  const std::size_t attention = d.q_channels * d.dim + 2 * d.kv_channels * d.dim + d.dim * d.q_channels;
  const std::size_t mlp = d.q_channels * d.mlp_hidden + d.mlp_hidden * d.q_channels +
                          d.mlp_hidden + d.q_channels;
  const std::size_t film = d.embed * (d.q_channels + d.kv_channels) * 2;
  const auto table = static_cast<std::size_t>(healpix::n_pixels(cfg.attn_zoom)) * d.embed;
  return cfg.layers * (attention + mlp + film) + table;
}

FSTModel::FSTModel(FSTConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  const BlockDims dims = cfg_.block_dims();
  for (std::size_t i = 0; i < cfg_.layers; ++i) blocks_.push_back(FSABlockParams::init(dims, rng));
  embedding_ = sph_harm_embedding(cfg_.attn_zoom, cfg_.embed_dim, rng()).table;
}

std::vector<std::pair<std::string, Tensor>> FSTModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out{{"embedding", embedding_}};
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    for (auto& [name, t] : blocks_[i].named()) {
      out.emplace_back("block" + std::to_string(i) + "." + name, t);
    }
  }
  return out;
}

std::size_t FSTModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_parameters()) n += t.numel();
  return n;
}

void FSTModel::zero_grad() {
  for (auto& [name, t] : named_parameters()) t.zero_grad();
}

FieldPyramid FSTModel::init_pyramid(const Tensor& input) const {
  const int zin = field_zoom(input);
  if (zin != cfg_.resolved_input_zoom()) {
    throw std::invalid_argument("input zoom " + std::to_string(zin) + " does not match configured " +
                                std::to_string(cfg_.resolved_input_zoom()));
  }
  FieldPyramid p;
  p.zooms = cfg_.zooms;
  p.levels.push_back(zin == cfg_.zooms.front() ? input : upsample(input, cfg_.zooms.front()));
  for (std::size_t i = 1; i < cfg_.zooms.size(); ++i) {
    p.levels.push_back(Tensor::zeros(
        {input.dim(0), static_cast<std::size_t>(healpix::n_pixels(cfg_.zooms[i])), input.dim(2)}));
  }
  return p;
}

ForwardResult FSTModel::forward(const Tensor& input, bool keep_snapshots) const {
  const TokenSpec spec = cfg_.token_spec();
  ForwardResult r;
  FieldPyramid state = init_pyramid(input);
  for (const auto& block : blocks_) {
    state = fsa_block_forward(state, block, spec, embedding_);
    if (cfg_.sc_per_block) state = scale_constrain(state);
    if (keep_snapshots) r.snapshots.push_back(state);
  }
  state = scale_constrain(state);
  r.output = reconstruct(state);
  r.final_pyramid = std::move(state);
  return r;
}

void randomize_parameters(FSTModel& model, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& [name, t] : model.named_parameters()) {
    for (auto& v : t.mutable_data()) v = u(rng);
  }
}

namespace {

// Row-major helpers over plain vectors.
void ref_layer_norm_film(const double* x, std::size_t rows_per_batch, std::size_t batch,
                         std::size_t c, const std::vector<double>& gamma,
                         const std::vector<double>& beta, double* out) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t n = 0; n < rows_per_batch; ++n) {
      const double* row = x + (b * rows_per_batch + n) * c;
      double* dst = out + (b * rows_per_batch + n) * c;
      double mu = 0.0;
      for (std::size_t j = 0; j < c; ++j) mu += row[j];
      mu /= static_cast<double>(c);
      double var = 0.0;
      for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
      var /= static_cast<double>(c);
      const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
      for (std::size_t j = 0; j < c; ++j) {
        const double xn = (row[j] - mu) * inv;
        dst[j] = (1.0 + gamma[n * c + j]) * xn + beta[n * c + j];
      }
    }
  }
}

// out[r, j] = sum_i a[r, i] * w[i, j]
std::vector<double> ref_project(const std::vector<double>& a, std::size_t rows, std::size_t in,
                                std::span<const double> w, std::size_t out_w) {
  std::vector<double> out(rows * out_w, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < out_w; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < in; ++i) s += a[r * in + i] * w[i * out_w + j];
      out[r * out_w + j] = s;
    }
  }
  return out;
}

std::vector<double> positional(const Tensor& emb, const Tensor& proj) {
  const std::size_t n = emb.dim(0);
  const std::vector<double> e(emb.data().begin(), emb.data().end());
  return ref_project(e, n, emb.dim(1), proj.data(), proj.dim(1));
}

}  // namespace

std::vector<double> single_scale_reference_layer(const std::vector<double>& tokens,
                                                 std::size_t batch, std::size_t n_tokens,
                                                 const FSABlockParams& params,
                                                 const Tensor& embedding,
                                                 std::vector<std::vector<double>>* attention) {
  const BlockDims d = params.dims();
  const std::size_t c = d.q_channels;
  if (d.kv_channels != c) throw std::invalid_argument("reference layer needs C_q == C_kv");
  if (tokens.size() != batch * n_tokens * c) throw std::invalid_argument("reference layer: token size");
  const std::size_t rows = batch * n_tokens;
  const std::size_t hd = d.dim / d.heads;

  const auto gq = positional(embedding, params.gamma_q);
  const auto bq = positional(embedding, params.beta_q);
  const auto gkv = positional(embedding, params.gamma_kv);
  const auto bkv = positional(embedding, params.beta_kv);

  // attention sublayer
  std::vector<double> xq(rows * c);
  std::vector<double> xkv(rows * c);
  ref_layer_norm_film(tokens.data(), n_tokens, batch, c, gq, bq, xq.data());
  ref_layer_norm_film(tokens.data(), n_tokens, batch, c, gkv, bkv, xkv.data());
  const auto q = ref_project(xq, rows, c, params.w_q.data(), d.dim);
  const auto k = ref_project(xkv, rows, c, params.w_k.data(), d.dim);
  const auto v = ref_project(xkv, rows, c, params.w_v.data(), d.dim);

  std::vector<double> ctx(rows * d.dim, 0.0);
  std::vector<double> weights(n_tokens);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < d.heads; ++h) {
      std::vector<double> head_weights;
      for (std::size_t i = 0; i < n_tokens; ++i) {
        const double* qi = q.data() + (b * n_tokens + i) * d.dim + h * hd;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < n_tokens; ++j) {
          const double* kj = k.data() + (b * n_tokens + j) * d.dim + h * hd;
          double s = 0.0;
          for (std::size_t t = 0; t < hd; ++t) s += qi[t] * kj[t];
          weights[j] = s / std::sqrt(static_cast<double>(hd));
          mx = std::max(mx, weights[j]);
        }
        double z = 0.0;
        for (auto& w : weights) {
          w = std::exp(w - mx);
          z += w;
        }
        for (auto& w : weights) w /= z;
        if (attention != nullptr) head_weights.insert(head_weights.end(), weights.begin(), weights.end());
        double* out = ctx.data() + (b * n_tokens + i) * d.dim + h * hd;
        for (std::size_t j = 0; j < n_tokens; ++j) {
          const double* vj = v.data() + (b * n_tokens + j) * d.dim + h * hd;
          for (std::size_t t = 0; t < hd; ++t) out[t] += weights[j] * vj[t];
        }
      }
      if (attention != nullptr) attention->push_back(std::move(head_weights));
    }
  }
  const auto attn_out = ref_project(ctx, rows, d.dim, params.w_o.data(), c);
  std::vector<double> x1(tokens);
  for (std::size_t i = 0; i < x1.size(); ++i) x1[i] += attn_out[i];

  // MLP sublayer, query-path modulation
  std::vector<double> xm(rows * c);
  ref_layer_norm_film(x1.data(), n_tokens, batch, c, gq, bq, xm.data());
  auto hidden = ref_project(xm, rows, c, params.w1.data(), d.mlp_hidden);
  const auto b1 = params.b1.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d.mlp_hidden; ++j) {
      const double a = hidden[r * d.mlp_hidden + j] + b1[j];
      hidden[r * d.mlp_hidden + j] = 0.5 * a * (1.0 + std::erf(a / std::sqrt(2.0)));
    }
  }
  const auto mlp_out = ref_project(hidden, rows, d.mlp_hidden, params.w2.data(), c);
  const auto b2 = params.b2.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < c; ++j) x1[r * c + j] += mlp_out[r * c + j] + b2[j];
  }
  return x1;
}

}  // namespace fst
