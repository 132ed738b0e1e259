// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fst/tensor.hpp"

namespace fst {

/// Linear warmup to lr_max over `warmup` steps, then cosine decay to zero at `total`.
double cosine_lr(std::size_t t, double lr_max, std::size_t warmup, std::size_t total);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;
using GradientSet = std::vector<std::vector<double>>;

/// Current gradients of `params` (zeros where no gradient has been accumulated).
GradientSet collect_grads(const NamedTensors& params);

class Adam {
 public:
  Adam(NamedTensors params, AdamConfig cfg = {});

  /// Updates with the parameters' accumulated gradients.
  void step(double lr);
  /// Updates with explicit gradients, one vector per parameter.
  void step(double lr, const GradientSet& grads);

  [[nodiscard]] std::size_t steps() const { return t_; }
  [[nodiscard]] const GradientSet& first_moment() const { return m_; }
  [[nodiscard]] const GradientSet& second_moment() const { return v_; }

 private:
  NamedTensors params_;
  AdamConfig cfg_;
  GradientSet m_;
  GradientSet v_;
  std::size_t t_ = 0;
};

}  // namespace fst
