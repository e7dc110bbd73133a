#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rccf/tensor.hpp"

namespace rccf {

/// Compares the reverse-mode gradient of a tensor-to-scalar function against
/// central finite differences at `point` and returns the worst relative error
/// max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over all
/// coordinates. `fn` may capture other tensors; only `point` is perturbed.
/// Non-finite function values are reported by throwing, never swallowed.
inline double finite_difference_check(const std::function<Tensor(const Tensor&)>& fn,
                                      Tensor point, double step = 1e-3) {
  if (!point.defined() || point.size() == 0)
    throw std::invalid_argument("finite_difference_check: empty point");

  const bool saved_rg = point.requires_grad();
  point.set_requires_grad(true);
  point.grad();  // allocate
  point.zero_grad();

  std::vector<double> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor out = fn(point);
    if (out.size() != 1)
      throw std::invalid_argument("finite_difference_check: fn must return a scalar");
    if (!std::isfinite(out.value()))
      throw std::runtime_error("finite_difference_check: non-finite value at the base point");
    tape.backward(out);
    analytic = point.grad();
  }

  double max_rel = 0.0;
  for (int i = 0; i < point.size(); ++i) {
    const double saved = point.v(i);
    point.v(i) = saved + step;
    const double fp = fn(point).value();
    point.v(i) = saved - step;
    const double fm = fn(point).value();
    point.v(i) = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("finite_difference_check: non-finite value while perturbing coordinate " +
                               std::to_string(i));
    const double numeric = (fp - fm) / (2.0 * step);
    const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::fabs(analytic[i] - numeric) / denom);
  }

  point.set_requires_grad(saved_rg);
  return max_rel;
}

}  // namespace rccf
