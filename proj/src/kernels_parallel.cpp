// SPDX-License-Identifier: Apache-2.0
#include <Eigen/Core>

#include <algorithm>

#include "fst/kernels.hpp"
#include "kernel_rows.hpp"

namespace fst::kernels::parallel {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// Fixed partition of the output rows. Independent of the team size so the
// blocked product rounds identically for any FST_THREADS.
constexpr std::size_t kRowBlock = 256;

// Below this many scalar updates a kernel stays on the calling thread.
constexpr std::size_t kMinParallelWork = std::size_t{1} << 15;

template <class A, class B>
void assign_block(MutMap& c, const A& a, const B& b, bool accumulate) {
  if (accumulate) {
    c.noalias() += a * b;
  } else {
    c.noalias() = a * b;
  }
}

}  // namespace

void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, Trans ta,
          std::span<const double> b, Trans tb, std::span<double> c, bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::fill(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(m * n), 0.0);
    return;
  }
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ki = static_cast<Eigen::Index>(k);
  const ConstMap a_map(a.data(), ta == Trans::kNo ? mi : ki, ta == Trans::kNo ? ki : mi);
  const ConstMap b_map(b.data(), tb == Trans::kNo ? ki : ni, tb == Trans::kNo ? ni : ki);
  const std::size_t blocks = (m + kRowBlock - 1) / kRowBlock;

#pragma omp parallel for schedule(static) if (blocks > 1 && m * n * k > kMinParallelWork)
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const auto r0 = static_cast<Eigen::Index>(blk * kRowBlock);
    const auto rows = std::min<Eigen::Index>(static_cast<Eigen::Index>(kRowBlock), mi - r0);
    MutMap c_blk(c.data() + r0 * ni, rows, ni);
    if (ta == Trans::kNo) {
      const auto a_blk = a_map.middleRows(r0, rows);
      if (tb == Trans::kNo) {
        assign_block(c_blk, a_blk, b_map, accumulate);
      } else {
        assign_block(c_blk, a_blk, b_map.transpose(), accumulate);
      }
    } else {
      const auto a_blk = a_map.middleCols(r0, rows).transpose();
      if (tb == Trans::kNo) {
        assign_block(c_blk, a_blk, b_map, accumulate);
      } else {
        assign_block(c_blk, a_blk, b_map.transpose(), accumulate);
      }
    }
  }
}

void softmax_rows(Rows s, double scale, std::span<const double> x, std::span<double> y) {
  const auto n = static_cast<Eigen::Index>(s.cols);
#pragma omp parallel for schedule(static) if (s.rows * s.cols > kMinParallelWork)
  for (std::size_t r = 0; r < s.rows; ++r) {
    // Eigen peels unaligned heads with scalar exp, so work on an aligned copy
    // to keep results independent of where the row sits in memory.
    thread_local Eigen::ArrayXd row;
    row = Eigen::Map<const Eigen::ArrayXd>(x.data() + r * s.cols, n);
    const double shift = scale >= 0.0 ? scale * row.maxCoeff() : scale * row.minCoeff();
    row = (scale * row - shift).exp();
    Eigen::Map<Eigen::ArrayXd>(y.data() + r * s.cols, n) = row * (1.0 / row.sum());
  }
}

void softmax_rows_backward(Rows s, double scale, std::span<const double> y, std::span<const double> dy,
                           std::span<double> dx) {
#pragma omp parallel for schedule(static) if (s.rows * s.cols > kMinParallelWork)
  for (std::size_t r = 0; r < s.rows; ++r) {
    const std::size_t o = r * s.cols;
    detail::softmax_row_backward(s.cols, scale, y.data() + o, dy.data() + o, dx.data() + o);
  }
}

void layer_norm_rows(Rows s, double eps, std::span<const double> x, std::span<double> y,
                     std::span<double> inv_std) {
#pragma omp parallel for schedule(static) if (s.rows * s.cols > kMinParallelWork)
  for (std::size_t r = 0; r < s.rows; ++r) {
    const std::size_t o = r * s.cols;
    detail::layer_norm_row(s.cols, eps, x.data() + o, y.data() + o, &inv_std[r]);
  }
}

void layer_norm_rows_backward(Rows s, std::span<const double> y, std::span<const double> inv_std,
                              std::span<const double> dy, std::span<double> dx) {
#pragma omp parallel for schedule(static) if (s.rows * s.cols > kMinParallelWork)
  for (std::size_t r = 0; r < s.rows; ++r) {
    const std::size_t o = r * s.cols;
    detail::layer_norm_row_backward(s.cols, y.data() + o, inv_std[r], dy.data() + o,
                                    dx.data() + o);
  }
}

void gelu(std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
#pragma omp parallel for simd schedule(static) if (n > kMinParallelWork)
  for (std::size_t i = 0; i < n; ++i) y[i] = detail::gelu_value(x[i]);
}

void gelu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx) {
  const std::size_t n = x.size();
#pragma omp parallel for simd schedule(static) if (n > kMinParallelWork)
  for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * detail::gelu_slope(x[i]);
}

void group_mean(Groups s, std::span<const double> x, std::span<double> y) {
  const std::size_t n = s.outer * s.groups;
#pragma omp parallel for schedule(static) if (x.size() > kMinParallelWork)
  for (std::size_t q = 0; q < n; ++q) {
    detail::group_mean_one(q, s.group, s.channels, x.data(), y.data());
  }
}

void group_repeat(Groups s, double scale, std::span<const double> x, std::span<double> y,
                  bool accumulate) {
  const std::size_t n = s.outer * s.groups;
#pragma omp parallel for schedule(static) if (y.size() > kMinParallelWork)
  for (std::size_t q = 0; q < n; ++q) {
    detail::group_repeat_one(q, s.group, s.channels, scale, x.data(), y.data(), accumulate);
  }
}

void group_sum_accumulate(Groups s, double scale, std::span<const double> x, std::span<double> y) {
  const std::size_t n = s.outer * s.groups;
#pragma omp parallel for schedule(static) if (x.size() > kMinParallelWork)
  for (std::size_t q = 0; q < n; ++q) {
    detail::group_sum_one(q, s.group, s.channels, scale, x.data(), y.data());
  }
}

}  // namespace fst::kernels::parallel
