#pragma once

#include <cstddef>
#include <functional>

#include "fanet/tensor.hpp"

namespace fanet {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;
};

using ScalarFn = std::function<Tensor<double>(const Tensor<double>&)>;

/// Compares the autodiff gradient of `f` at `x` with central differences
/// (f(x+h e) - f(x-h e)) / 2h, coordinate by coordinate. Relative error
/// uses max(|a|, |b|, 1e-8) as denominator. Throws NumericalError naming
/// the coordinate if any evaluation is non-finite.
GradCheckResult grad_check(const ScalarFn& f, const Tensor<double>& x, double h = 1e-5);

}  // namespace fanet
