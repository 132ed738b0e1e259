// SPDX-License-Identifier: Apache-2.0
#include "fst/kernels.hpp"
#include "kernel_rows.hpp"

namespace fst::kernels::serial {

void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, Trans ta,
          std::span<const double> b, Trans tb, std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta == Trans::kNo ? a[i * k + p] : a[p * m + i];
        const double bv = tb == Trans::kNo ? b[p * n + j] : b[j * k + p];
        s += av * bv;
      }
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

void softmax_rows(Rows s, double scale, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < s.rows; ++r) {
    detail::softmax_row(s.cols, scale, x.data() + r * s.cols, y.data() + r * s.cols);
  }
}

void softmax_rows_backward(Rows s, double scale, std::span<const double> y, std::span<const double> dy,
                           std::span<double> dx) {
  for (std::size_t r = 0; r < s.rows; ++r) {
    const std::size_t o = r * s.cols;
    detail::softmax_row_backward(s.cols, scale, y.data() + o, dy.data() + o, dx.data() + o);
  }
}

void layer_norm_rows(Rows s, double eps, std::span<const double> x, std::span<double> y,
                     std::span<double> inv_std) {
  for (std::size_t r = 0; r < s.rows; ++r) {
    const std::size_t o = r * s.cols;
    detail::layer_norm_row(s.cols, eps, x.data() + o, y.data() + o, &inv_std[r]);
  }
}

void layer_norm_rows_backward(Rows s, std::span<const double> y, std::span<const double> inv_std,
                              std::span<const double> dy, std::span<double> dx) {
  for (std::size_t r = 0; r < s.rows; ++r) {
    const std::size_t o = r * s.cols;
    detail::layer_norm_row_backward(s.cols, y.data() + o, inv_std[r], dy.data() + o,
                                    dx.data() + o);
  }
}

void gelu(std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = detail::gelu_value(x[i]);
}

void gelu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx) {
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] += dy[i] * detail::gelu_slope(x[i]);
}

void group_mean(Groups s, std::span<const double> x, std::span<double> y) {
  for (std::size_t q = 0; q < s.outer * s.groups; ++q) {
    detail::group_mean_one(q, s.group, s.channels, x.data(), y.data());
  }
}

void group_repeat(Groups s, double scale, std::span<const double> x, std::span<double> y,
                  bool accumulate) {
  for (std::size_t q = 0; q < s.outer * s.groups; ++q) {
    detail::group_repeat_one(q, s.group, s.channels, scale, x.data(), y.data(), accumulate);
  }
}

void group_sum_accumulate(Groups s, double scale, std::span<const double> x, std::span<double> y) {
  for (std::size_t q = 0; q < s.outer * s.groups; ++q) {
    detail::group_sum_one(q, s.group, s.channels, scale, x.data(), y.data());
  }
}

}  // namespace fst::kernels::serial
