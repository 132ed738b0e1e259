// SPDX-License-Identifier: Apache-2.0
//
// Single-row bodies shared by the serial and parallel kernels. Keeping one
// definition guarantees both variants reduce in the same order.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>

namespace fst::kernels::detail {

inline void softmax_row(std::size_t n, double scale, const double* x, double* y) {
  double mx = scale * x[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, scale * x[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    y[j] = std::exp(scale * x[j] - mx);
    sum += y[j];
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < n; ++j) y[j] *= inv;
}

inline void softmax_row_backward(std::size_t n, double scale, const double* y, const double* dy,
                                 double* dx) {
  double dot = 0.0;
  for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
  for (std::size_t j = 0; j < n; ++j) dx[j] += scale * y[j] * (dy[j] - dot);
}

inline void layer_norm_row(std::size_t n, double eps, const double* x, double* y,
                           double* inv_std) {
  double mean = 0.0;
  for (std::size_t j = 0; j < n; ++j) mean += x[j];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = x[j] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double inv = 1.0 / std::sqrt(var + eps);
  for (std::size_t j = 0; j < n; ++j) y[j] = (x[j] - mean) * inv;
  *inv_std = inv;
}

// dx += inv_std * (dy - mean(dy) - y * mean(dy * y))
inline void layer_norm_row_backward(std::size_t n, const double* y, double inv_std,
                                    const double* dy, double* dx) {
  double mean_dy = 0.0;
  double mean_dyy = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    mean_dy += dy[j];
    mean_dyy += dy[j] * y[j];
  }
  mean_dy /= static_cast<double>(n);
  mean_dyy /= static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) dx[j] += inv_std * (dy[j] - mean_dy - y[j] * mean_dyy);
}

inline double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

inline double gelu_slope(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
  return cdf + x * pdf;
}

// Pairwise sum of n values spaced `stride` apart. The sum of 4^k equal values
// is exact, so pooling an upsampled field returns it bit for bit.
inline double pairwise_sum(const double* x, std::size_t n, std::size_t stride) {
  if (n == 1) return x[0];
  if (n == 2) return x[0] + x[stride];
  const std::size_t half = n / 2;
  return pairwise_sum(x, half, stride) + pairwise_sum(x + half * stride, n - half, stride);
}

// Group kernels on flat group index q over [*, group, channels] blocks.
inline void group_mean_one(std::size_t q, std::size_t group, std::size_t channels,
                           const double* x, double* y) {
  const double inv = 1.0 / static_cast<double>(group);
  const double* src = x + q * group * channels;
  for (std::size_t ch = 0; ch < channels; ++ch) y[q * channels + ch] = pairwise_sum(src + ch, group, channels) * inv;
}

inline void group_repeat_one(std::size_t q, std::size_t group, std::size_t channels, double scale,
                             const double* x, double* y, bool accumulate) {
  double* dst = y + q * group * channels;
  const double* src = x + q * channels;
  for (std::size_t j = 0; j < group; ++j) {
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const double v = scale * src[ch];
      dst[j * channels + ch] = accumulate ? dst[j * channels + ch] + v : v;
    }
  }
}

inline void group_sum_one(std::size_t q, std::size_t group, std::size_t channels, double scale,
                          const double* x, double* y) {
  const double* src = x + q * group * channels;
  for (std::size_t ch = 0; ch < channels; ++ch) y[q * channels + ch] += scale * pairwise_sum(src + ch, group, channels);
}

}  // namespace fst::kernels::detail
