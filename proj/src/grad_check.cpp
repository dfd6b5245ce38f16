#include "fanet/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fanet/error.hpp"

namespace fanet {

namespace {

double eval_scalar(const ScalarFn& f, const Tensor<double>& x, std::size_t coord) {
  const Tensor<double> y = f(x);
  if (y.numel() != 1) throw DimensionError("grad_check: f must return a scalar");
  const double v = y.item();
  if (!std::isfinite(v)) {
    throw NumericalError("grad_check: non-finite f value when perturbing coordinate " +
                         std::to_string(coord));
  }
  return v;
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& f, const Tensor<double>& x, double h) {
  Tensor<double> leaf = x.detach();
  leaf.set_requires_grad(true);
  Tensor<double> y = f(leaf);
  if (y.numel() != 1) throw DimensionError("grad_check: f must return a scalar");
  y.backward();
  std::vector<double> analytic(leaf.numel(), 0.0);
  if (leaf.has_grad()) std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());

  GradCheckResult result;
  NoGradGuard no_grad;
  Tensor<double> probe = x.detach();
  auto pv = probe.data();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double a = analytic[i];
    if (!std::isfinite(a)) {
      throw NumericalError("grad_check: non-finite analytic gradient at coordinate " +
                           std::to_string(i));
    }
    const double orig = pv[i];
    pv[i] = orig + h;
    const double fp = eval_scalar(f, probe, i);
    pv[i] = orig - h;
    const double fm = eval_scalar(f, probe, i);
    pv[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    const double rel = std::abs(a - numeric) / denom;
    if (i == 0 || rel > result.max_relative_error) result = {rel, i, a, numeric};
  }
  return result;
}

}  // namespace fanet
