// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major kernels behind the tensor ops. Two implementations share
// one interface: `serial` is the plain-loop reference used by the tests, and
// `parallel` is the OpenMP version used at runtime. Every reduction in
// `parallel` is owned by a single thread with a fixed order, so its results
// do not depend on the thread count. gemm (blocked product) and softmax
// (vectorized exp) differ from the reference by rounding; the remaining kernels
// are bitwise identical.
#pragma once

#include <cstddef>
#include <span>

namespace fst::kernels {

enum class Trans { kNo, kYes };

/// Shape of a row-wise kernel: `rows` independent rows of length `cols`.
struct Rows {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Shape of a grouped pixel axis: [outer, groups * group, channels].
struct Groups {
  std::size_t outer = 0;
  std::size_t groups = 0;
  std::size_t group = 0;
  std::size_t channels = 0;
};

// Kernel contracts (identical for both namespaces):
//   gemm                      c[m,n] (+)= op(a)[m,k] * op(b)[k,n]
//   softmax_rows              y = softmax(scale * x) per row, max-shifted
//   softmax_rows_backward     dx += scale * y * (dy - <dy, y>) per row
//   layer_norm_rows           y = (x - mean) * inv_std, inv_std = 1/sqrt(var + eps)
//   layer_norm_rows_backward  dx += gradient of the above given y and inv_std
//   gelu / gelu_backward      exact erf form; backward accumulates into dx
//   group_mean                y[o,p,c] = mean_j x[o, p*group + j, c]
//   group_repeat              y[o, p*group + j, c] (+)= scale * x[o,p,c]
//   group_sum_accumulate      y[o,p,c] += scale * sum_j x[o, p*group + j, c]

namespace serial {
void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, Trans ta,
          std::span<const double> b, Trans tb, std::span<double> c, bool accumulate);
void softmax_rows(Rows s, double scale, std::span<const double> x, std::span<double> y);
void softmax_rows_backward(Rows s, double scale, std::span<const double> y, std::span<const double> dy,
                           std::span<double> dx);
void layer_norm_rows(Rows s, double eps, std::span<const double> x, std::span<double> y,
                     std::span<double> inv_std);
void layer_norm_rows_backward(Rows s, std::span<const double> y, std::span<const double> inv_std,
                              std::span<const double> dy, std::span<double> dx);
void gelu(std::span<const double> x, std::span<double> y);
void gelu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx);
void group_mean(Groups s, std::span<const double> x, std::span<double> y);
void group_repeat(Groups s, double scale, std::span<const double> x, std::span<double> y,
                  bool accumulate);
void group_sum_accumulate(Groups s, double scale, std::span<const double> x, std::span<double> y);
}  // namespace serial

namespace parallel {
void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, Trans ta,
          std::span<const double> b, Trans tb, std::span<double> c, bool accumulate);
void softmax_rows(Rows s, double scale, std::span<const double> x, std::span<double> y);
void softmax_rows_backward(Rows s, double scale, std::span<const double> y, std::span<const double> dy,
                           std::span<double> dx);
void layer_norm_rows(Rows s, double eps, std::span<const double> x, std::span<double> y,
                     std::span<double> inv_std);
void layer_norm_rows_backward(Rows s, std::span<const double> y, std::span<const double> inv_std,
                              std::span<const double> dy, std::span<double> dx);
void gelu(std::span<const double> x, std::span<double> y);
void gelu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx);
void group_mean(Groups s, std::span<const double> x, std::span<double> y);
void group_repeat(Groups s, double scale, std::span<const double> x, std::span<double> y,
                  bool accumulate);
void group_sum_accumulate(Groups s, double scale, std::span<const double> x, std::span<double> y);
}  // namespace parallel

}  // namespace fst::kernels
