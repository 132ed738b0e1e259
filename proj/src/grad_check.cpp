// SPDX-License-Identifier: Apache-2.0
#include "fst/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fst {
namespace {

void check_eps(double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-4)) throw std::invalid_argument("grad_check eps outside [1e-7, 1e-4]");
}

double finite_value(const Tensor& t) {
  const double v = t.item();
  if (!std::isfinite(v)) throw std::domain_error("grad_check: non-finite function value");
  return v;
}

void record(GradCheckReport& rep, const std::string& name, std::size_t i, double analytic,
            double numeric) {
  const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
  ++rep.coordinates;
  if (rep.coordinates == 1 || err > rep.max_rel_error) {
    rep.max_rel_error = err;
    rep.worst_tensor = name;
    rep.worst_index = i;
    rep.analytic = analytic;
    rep.numeric = numeric;
  }
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double eps) {
  Tensor leaf = Tensor::from_data(x.shape(), std::vector<double>(x.data().begin(), x.data().end()),
                                  true);
  return grad_check_params([&] { return f(leaf); }, {{"x", leaf}}, eps);
}

GradCheckReport grad_check_params(const std::function<Tensor()>& loss,
                                  std::vector<std::pair<std::string, Tensor>> params, double eps) {
  check_eps(eps);
  for (auto& [name, p] : params) {
    if (!p.is_leaf() || !p.requires_grad()) {
      throw std::invalid_argument("grad_check: parameter " + name + " is not a differentiable leaf");
    }
    p.zero_grad();
  }
  const Tensor l = loss();
  finite_value(l);
  backward(l);

  GradCheckReport rep;
  for (auto& [name, p] : params) {
    const std::vector<double> analytic = p.has_grad()
                                             ? std::vector<double>(p.grad().begin(), p.grad().end())
                                             : std::vector<double>(p.numel(), 0.0);
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = finite_value(loss());
      values[i] = saved - eps;
      const double down = finite_value(loss());
      values[i] = saved;
      record(rep, name, i, analytic[i], (up - down) / (2.0 * eps));
    }
    p.zero_grad();
  }
  return rep;
}

}  // namespace fst
