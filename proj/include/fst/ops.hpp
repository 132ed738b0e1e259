// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "fst/tensor.hpp"

namespace fst {

inline constexpr double kLayerNormEps = 1e-5;

// Broadcasting: for the binary elementwise ops `b` may have the same shape as
// `a` or a trailing suffix of it, in which case it repeats over a's leading axes.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

/// [..., m, k] x [..., k, n]. Batch axes must match, or `b` may be a plain
/// [k, n] matrix shared across a's batch.
Tensor matmul(const Tensor& a, const Tensor& b);

/// softmax(scale * q k^T) v over the last two axes with matching leading axes.
/// The attention weights are copied to `probs` when it is non-null.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale,
                            Tensor* probs = nullptr);
/// Swaps the two trailing axes.
Tensor transpose_last2(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat_last(const std::vector<Tensor>& parts);
/// Columns [begin, end) of the last axis.
Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end);

Tensor gelu(const Tensor& x);
/// softmax(scale * x) along the last axis.
Tensor softmax_lastdim(const Tensor& x, double scale = 1.0);
/// Normalizes the last axis to zero mean and unit variance; no affine part.
Tensor layer_norm(const Tensor& x, double eps = kLayerNormEps);

/// [..., N*g, C] -> [..., N, C], mean over g consecutive pixels.
Tensor group_mean_pool(const Tensor& x, std::size_t g);
/// [..., N, C] -> [..., N*g, C], each pixel repeated g times.
Tensor repeat_upsample(const Tensor& x, std::size_t g);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// mean((a - b)^2) over all elements.
Tensor mse(const Tensor& a, const Tensor& b);

}  // namespace fst
