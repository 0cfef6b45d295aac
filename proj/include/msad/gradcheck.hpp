#pragma once

#include <functional>

#include "msad/tensor.hpp"

namespace msad {

// Scalar-valued differentiable function of one tensor. Called with a tape to
// obtain the analytic gradient and without one for plain evaluations.
using ScalarFn = std::function<Tensor(const Tensor&, Tape*)>;

// Central-difference check of the analytic gradient of f at x:
// max over coordinates of |analytic - (f(x+h) - f(x-h)) / 2h| / max(1, |analytic|).
// x is perturbed in place and restored; f must be pure given x.
double finite_diff_check(const ScalarFn& f, const Tensor& x, double h);

}  // namespace msad
