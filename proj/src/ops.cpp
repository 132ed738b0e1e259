// SPDX-License-Identifier: Apache-2.0
#include "fst/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "fst/kernels.hpp"

namespace fst {
namespace kp = kernels::parallel;
using detail::Node;

namespace {

// Number of times `b` repeats over the leading axes of `a`.
std::size_t broadcast_count(const Shape& a, const Shape& b, const char* op) {
  if (b.size() > a.size() || !std::equal(b.begin(), b.end(), a.end() - static_cast<std::ptrdiff_t>(b.size()))) {
    throw std::invalid_argument(std::string(op) + ": shape " + shape_string(b) +
                                " does not broadcast onto " + shape_string(a));
  }
  return shape_numel(a) / std::max<std::size_t>(1, shape_numel(b));
}

Node& input(Node& self, std::size_t i) { return *self.inputs[i]; }

// Accumulates g (length reps * nb) into the grad of b, summing over repeats in order.
void reduce_into(std::vector<double>& dst, const std::vector<double>& g, std::size_t reps) {
  const std::size_t nb = dst.size();
  for (std::size_t r = 0; r < reps; ++r) {
    const double* src = g.data() + r * nb;
    for (std::size_t j = 0; j < nb; ++j) dst[j] += src[j];
  }
}

Tensor add_sub(const Tensor& a, const Tensor& b, double sign, const char* name) {
  const std::size_t reps = broadcast_count(a.shape(), b.shape(), name);
  const auto av = a.data();
  const auto bv = b.data();
  const std::size_t nb = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t j = 0; j < nb; ++j) out[r * nb + j] = av[r * nb + j] + sign * bv[j];
  }
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [reps, sign](Node& self) {
    Node& na = input(self, 0);
    Node& nb_ = input(self, 1);
    if (na.requires_grad) {
      auto& g = na.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (nb_.requires_grad) {
      auto& g = nb_.grad_buffer();
      if (sign > 0) {
        reduce_into(g, self.grad, reps);
      } else {
        std::vector<double> neg(self.grad.size());
        for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -self.grad[i];
        reduce_into(g, neg, reps);
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_sub(a, b, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_sub(a, b, -1.0, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const std::size_t reps = broadcast_count(a.shape(), b.shape(), "mul");
  const auto av = a.data();
  const auto bv = b.data();
  const std::size_t nb = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t j = 0; j < nb; ++j) out[r * nb + j] = av[r * nb + j] * bv[j];
  }
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [reps, nb](Node& self) {
    Node& na = input(self, 0);
    Node& nbn = input(self, 1);
    if (na.requires_grad) {
      auto& g = na.grad_buffer();
      for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t j = 0; j < nb; ++j) g[r * nb + j] += self.grad[r * nb + j] * nbn.value[j];
      }
    }
    if (nbn.requires_grad) {
      auto& g = nbn.grad_buffer();
      for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t j = 0; j < nb; ++j) g[j] += self.grad[r * nb + j] * na.value[r * nb + j];
      }
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [s](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v += s;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) throw std::invalid_argument("matmul needs rank >= 2 operands");
  const std::size_t m = a.dim(-2);
  const std::size_t k = a.dim(-1);
  const std::size_t n = b.dim(-1);
  if (b.dim(-2) != k) {
    throw std::invalid_argument("matmul: inner dimensions differ, " + shape_string(a.shape()) +
                                " x " + shape_string(b.shape()));
  }
  const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
  const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
  const bool shared_b = b_batch.empty();
  if (!shared_b && b_batch != a_batch) {
    throw std::invalid_argument("matmul: batch axes differ, " + shape_string(a.shape()) + " x " +
                                shape_string(b.shape()));
  }
  const std::size_t batch = shape_numel(a_batch);
  Shape out_shape = a_batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(batch * m * n);
  const auto av = a.data();
  const auto bv = b.data();
  using kernels::Trans;
  if (shared_b) {
    // Fold the batch into the row axis: one [batch*m, k] x [k, n] product.
    kp::gemm(batch * m, n, k, av, Trans::kNo, bv, Trans::kNo, out, false);
  } else {
    for (std::size_t i = 0; i < batch; ++i) {
      kp::gemm(m, n, k, av.subspan(i * m * k, m * k), Trans::kNo, bv.subspan(i * k * n, k * n),
               Trans::kNo, std::span<double>(out).subspan(i * m * n, m * n), false);
    }
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), {a, b},
                             [=](Node& self) {
    Node& na = input(self, 0);
    Node& nb = input(self, 1);
    const std::span<const double> dy = self.grad;
    if (shared_b) {
      if (na.requires_grad) {
        kp::gemm(batch * m, k, n, dy, Trans::kNo, nb.value, Trans::kYes, na.grad_buffer(), true);
      }
      if (nb.requires_grad) {
        kp::gemm(k, n, batch * m, na.value, Trans::kYes, dy, Trans::kNo, nb.grad_buffer(), true);
      }
      return;
    }
    for (std::size_t i = 0; i < batch; ++i) {
      const auto dyi = dy.subspan(i * m * n, m * n);
      if (na.requires_grad) {
        const auto bi = std::span<const double>(nb.value).subspan(i * k * n, k * n);
        kp::gemm(m, k, n, dyi, Trans::kNo, bi, Trans::kYes,
                 std::span<double>(na.grad_buffer()).subspan(i * m * k, m * k), true);
      }
      if (nb.requires_grad) {
        const auto ai = std::span<const double>(na.value).subspan(i * m * k, m * k);
        kp::gemm(k, n, m, ai, Trans::kYes, dyi, Trans::kNo,
                 std::span<double>(nb.grad_buffer()).subspan(i * k * n, k * n), true);
      }
    }
  });
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale,
                            Tensor* probs) {
  if (q.rank() < 2 || k.rank() != q.rank() || v.rank() != q.rank()) {
    throw std::invalid_argument("attention operands need equal rank >= 2");
  }
  const Shape batch_shape(q.shape().begin(), q.shape().end() - 2);
  if (!std::equal(batch_shape.begin(), batch_shape.end(), k.shape().begin()) ||
      !std::equal(batch_shape.begin(), batch_shape.end(), v.shape().begin()) || k.dim(-1) != q.dim(-1) ||
      v.dim(-2) != k.dim(-2)) {
    throw std::invalid_argument("attention: incompatible shapes " + shape_string(q.shape()) + ", " +
                                shape_string(k.shape()) + ", " + shape_string(v.shape()));
  }
  const std::size_t batch = shape_numel(batch_shape);
  const std::size_t n = q.dim(-2);
  const std::size_t m = k.dim(-2);
  const std::size_t d = q.dim(-1);
  const std::size_t dv = v.dim(-1);
  using kernels::Trans;

  // Row-stochastic weights P = softmax(scale * Q K^T), kept for the backward pass.
  auto p = std::make_shared<std::vector<double>>(batch * n * m);
  std::vector<double> out(batch * n * dv);
  for (std::size_t i = 0; i < batch; ++i) {
    const std::span<double> pi = std::span<double>(*p).subspan(i * n * m, n * m);
    kp::gemm(n, m, d, q.data().subspan(i * n * d, n * d), Trans::kNo, k.data().subspan(i * m * d, m * d),
             Trans::kYes, pi, false);
    kp::softmax_rows({n, m}, scale, pi, pi);
    kp::gemm(n, dv, m, pi, Trans::kNo, v.data().subspan(i * m * dv, m * dv), Trans::kNo,
             std::span<double>(out).subspan(i * n * dv, n * dv), false);
  }
  if (probs != nullptr) {
    Shape ps = batch_shape;
    ps.push_back(n);
    ps.push_back(m);
    *probs = Tensor::from_data(std::move(ps), *p);
  }
  Shape out_shape = batch_shape;
  out_shape.push_back(n);
  out_shape.push_back(dv);
  return Tensor::make_result(std::move(out_shape), std::move(out), {q, k, v}, [=](Node& self) {
    Node& nq = input(self, 0);
    Node& nk = input(self, 1);
    Node& nv = input(self, 2);
    std::vector<double> ds(n * m);
    for (std::size_t i = 0; i < batch; ++i) {
      const auto pi = std::span<const double>(*p).subspan(i * n * m, n * m);
      const auto dy = std::span<const double>(self.grad).subspan(i * n * dv, n * dv);
      if (nv.requires_grad) {
        kp::gemm(m, dv, n, pi, Trans::kYes, dy, Trans::kNo,
                 std::span<double>(nv.grad_buffer()).subspan(i * m * dv, m * dv), true);
      }
      if (!nq.requires_grad && !nk.requires_grad) continue;
      // dP = dY V^T, then the softmax Jacobian turns it into d(scores).
      std::vector<double> dp(n * m);
      kp::gemm(n, m, dv, dy, Trans::kNo, std::span<const double>(nv.value).subspan(i * m * dv, m * dv),
               Trans::kYes, dp, false);
      std::fill(ds.begin(), ds.end(), 0.0);
      kp::softmax_rows_backward({n, m}, scale, pi, dp, ds);
      if (nq.requires_grad) {
        kp::gemm(n, d, m, ds, Trans::kNo, std::span<const double>(nk.value).subspan(i * m * d, m * d),
                 Trans::kNo, std::span<double>(nq.grad_buffer()).subspan(i * n * d, n * d), true);
      }
      if (nk.requires_grad) {
        kp::gemm(m, d, n, ds, Trans::kYes, std::span<const double>(nq.value).subspan(i * n * d, n * d),
                 Trans::kNo, std::span<double>(nk.grad_buffer()).subspan(i * m * d, m * d), true);
      }
    }
  });
}

Tensor transpose_last2(const Tensor& x) {
  if (x.rank() < 2) throw std::invalid_argument("transpose_last2 needs rank >= 2");
  const std::size_t r = x.dim(-2);
  const std::size_t c = x.dim(-1);
  const std::size_t batch = x.numel() / std::max<std::size_t>(1, r * c);
  Shape shape = x.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t b = 0; b < batch; ++b) {
    const double* src = xv.data() + b * r * c;
    double* dst = out.data() + b * r * c;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
    }
  }
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [=](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t b = 0; b < batch; ++b) {
      const double* src = self.grad.data() + b * r * c;
      double* dst = g.data() + b * r * c;
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) dst[i * c + j] += src[j * r + i];
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw std::invalid_argument("reshape " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_last of nothing");
  const Shape lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != lead.size() + 1 || !std::equal(lead.begin(), lead.end(), p.shape().begin())) {
      throw std::invalid_argument("concat_last: leading axes differ, " +
                                  shape_string(parts[0].shape()) + " vs " + shape_string(p.shape()));
    }
    widths.push_back(p.dim(-1));
    total += p.dim(-1);
  }
  const std::size_t rows = shape_numel(lead);
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto pv = parts[i].data();
    const std::size_t w = widths[i];
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.data() + r * w, w, out.data() + r * total + offset);
    }
    offset += w;
  }
  Shape shape = lead;
  shape.push_back(total);
  return Tensor::make_result(std::move(shape), std::move(out), parts, [=](Node& self) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      Node& in = input(self, i);
      const std::size_t w = widths[i];
      if (in.requires_grad) {
        auto& g = in.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < w; ++j) g[r * w + j] += self.grad[r * total + off + j];
        }
      }
      off += w;
    }
  });
}

Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t c = x.dim(-1);
  if (begin > end || end > c) {
    throw std::out_of_range("slice_last [" + std::to_string(begin) + "," + std::to_string(end) +
                            ") of width " + std::to_string(c));
  }
  const std::size_t w = end - begin;
  const std::size_t rows = x.numel() / std::max<std::size_t>(1, c);
  const auto xv = x.data();
  std::vector<double> out(rows * w);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.data() + r * c + begin, w, out.data() + r * w);
  }
  Shape shape = x.shape();
  shape.back() = w;
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [=](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < w; ++j) g[r * c + begin + j] += self.grad[r * w + j];
    }
  });
}

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.numel());
  kp::gelu(x.data(), out);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    Node& in = input(self, 0);
    kp::gelu_backward(in.value, self.grad, in.grad_buffer());
  });
}

Tensor softmax_lastdim(const Tensor& x, double scale) {
  if (x.rank() < 1 || x.dim(-1) == 0) throw std::invalid_argument("softmax over an empty axis");
  const kernels::Rows rows{x.numel() / x.dim(-1), x.dim(-1)};
  std::vector<double> out(x.numel());
  kp::softmax_rows(rows, scale, x.data(), out);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [rows, scale](Node& self) {
    kp::softmax_rows_backward(rows, scale, self.value, self.grad, input(self, 0).grad_buffer());
  });
}

Tensor layer_norm(const Tensor& x, double eps) {
  if (x.rank() < 1 || x.dim(-1) == 0) throw std::invalid_argument("layer_norm over an empty axis");
  const kernels::Rows rows{x.numel() / x.dim(-1), x.dim(-1)};
  std::vector<double> out(x.numel());
  std::vector<double> inv_std(rows.rows);
  kp::layer_norm_rows(rows, eps, x.data(), out, inv_std);
  return Tensor::make_result(x.shape(), std::move(out), {x},
                             [rows, inv_std = std::move(inv_std)](Node& self) {
    kp::layer_norm_rows_backward(rows, self.value, inv_std, self.grad, input(self, 0).grad_buffer());
  });
}

namespace {

kernels::Groups pixel_groups(const Shape& fine, std::size_t g, const char* op) {
  if (fine.size() < 2) throw std::invalid_argument(std::string(op) + " needs rank >= 2");
  if (g == 0) throw std::invalid_argument(std::string(op) + ": zero group size");
  const std::size_t pixels = fine[fine.size() - 2];
  if (pixels % g != 0) {
    throw std::invalid_argument(std::string(op) + ": pixel axis " + std::to_string(pixels) +
                                " not divisible by " + std::to_string(g));
  }
  const std::size_t channels = fine.back();
  const std::size_t outer = shape_numel(fine) / std::max<std::size_t>(1, pixels * channels);
  return {outer, pixels / g, g, channels};
}

}  // namespace

Tensor group_mean_pool(const Tensor& x, std::size_t g) {
  const auto groups = pixel_groups(x.shape(), g, "group_mean_pool");
  Shape shape = x.shape();
  shape[shape.size() - 2] = groups.groups;
  std::vector<double> out(shape_numel(shape));
  kp::group_mean(groups, x.data(), out);
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [groups](Node& self) {
    kp::group_repeat(groups, 1.0 / static_cast<double>(groups.group), self.grad,
                     input(self, 0).grad_buffer(), true);
  });
}

Tensor repeat_upsample(const Tensor& x, std::size_t g) {
  if (x.rank() < 2) throw std::invalid_argument("repeat_upsample needs rank >= 2");
  Shape shape = x.shape();
  shape[shape.size() - 2] *= g;
  const auto groups = pixel_groups(shape, g, "repeat_upsample");
  std::vector<double> out(shape_numel(shape));
  kp::group_repeat(groups, 1.0, x.data(), out, false);
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [groups](Node& self) {
    kp::group_sum_accumulate(groups, 1.0, self.grad, input(self, 0).grad_buffer());
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::make_result({}, {s}, {x}, [](Node& self) {
    auto& g = input(self, 0).grad_buffer();
    const double d = self.grad[0];
    for (auto& v : g) v += d;
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw std::invalid_argument("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("mse: shapes differ, " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
  if (a.numel() == 0) throw std::invalid_argument("mse of empty tensors");
  const auto av = a.data();
  const auto bv = b.data();
  const double inv_n = 1.0 / static_cast<double>(av.size());
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  return Tensor::make_result({}, {s * inv_n}, {a, b}, [inv_n](Node& self) {
    Node& na = input(self, 0);
    Node& nb = input(self, 1);
    const double k = 2.0 * inv_n * self.grad[0];
    if (na.requires_grad) {
      auto& g = na.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * (na.value[i] - nb.value[i]);
    }
    if (nb.requires_grad) {
      auto& g = nb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= k * (na.value[i] - nb.value[i]);
    }
  });
}

}  // namespace fst
