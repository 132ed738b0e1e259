// SPDX-License-Identifier: Apache-2.0
#include "fst/optim.hpp"

#include <cmath>
#include <numbers>

namespace fst {

double cosine_lr(std::size_t t, double lr_max, std::size_t warmup, std::size_t total) {
  if (t > total) throw std::invalid_argument("cosine_lr: step past the end of the schedule");
  if (t < warmup) return lr_max * static_cast<double>(t) / static_cast<double>(warmup);
  if (total == warmup) return lr_max;
  const double progress = static_cast<double>(t - warmup) / static_cast<double>(total - warmup);
  return lr_max * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

GradientSet collect_grads(const NamedTensors& params) {
  GradientSet out;
  out.reserve(params.size());
  for (const auto& [name, t] : params) {
    if (t.has_grad()) {
      out.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      out.emplace_back(t.numel(), 0.0);
    }
  }
  return out;
}

Adam::Adam(NamedTensors params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& [name, t] : params_) {
    if (!t.is_leaf()) throw std::invalid_argument("Adam parameter " + name + " is not a leaf");
    m_.emplace_back(t.numel(), 0.0);
    v_.emplace_back(t.numel(), 0.0);
  }
}

void Adam::step(double lr) { step(lr, collect_grads(params_)); }

void Adam::step(double lr, const GradientSet& grads) {
  if (grads.size() != params_.size()) throw std::invalid_argument("Adam: gradient count mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].size() != params_[i].second.numel()) {
      throw std::invalid_argument("Adam: gradient size mismatch for " + params_[i].first);
    }
    for (std::size_t j = 0; j < grads[i].size(); ++j) {
      if (!std::isfinite(grads[i][j])) {
        throw NonFiniteError("non-finite gradient in " + params_[i].first + "[" + std::to_string(j) +
                             "] at optimizer step " + std::to_string(t_ + 1));
      }
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto p = params_[i].second.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
    }
  }
}

}  // namespace fst
