// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fst/tensor.hpp"

namespace fst {

struct GradCheckReport {
  /// max over coordinates of |analytic - numeric| / max(1, |analytic|)
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares the backward pass of scalar `f` at `x` with central differences.
/// Throws std::invalid_argument for eps outside [1e-7, 1e-4] and
/// std::domain_error when f produces a non-finite value.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double eps = 1e-6);

/// Same check over every coordinate of a set of leaf parameters. `loss` must
/// rebuild the graph from the parameters' current values on each call.
GradCheckReport grad_check_params(const std::function<Tensor()>& loss,
                                  std::vector<std::pair<std::string, Tensor>> params,
                                  double eps = 1e-6);

}  // namespace fst
