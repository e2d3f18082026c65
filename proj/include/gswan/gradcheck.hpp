#pragma once

#include <functional>

#include "gswan/array.hpp"
#include "gswan/tape.hpp"

namespace gswan::diff {

// Builds a scalar expression from one leaf; used both for the analytic
// gradient (tape backward) and for value-only probes at perturbed points.
using ScalarFn = std::function<Var(Tape&, Var)>;

// Max relative error between the tape gradient of f at x0 and central
// differences with per-coordinate step h*max(1,|x0_i|). Relative-error
// denominators are floored at 1e-8. Throws NumericError if f evaluates
// to a non-finite value at any probe point.
double finite_difference_check(const ScalarFn& f, const Array& x0, double h = 1e-5);

// Same check against an externally supplied scalar function and gradient;
// useful when the function is not expressed on a tape.
double finite_difference_check_raw(const std::function<double(const Array&)>& f, const Array& x0,
                                   const Array& analytic_grad, double h = 1e-5);

}  // namespace gswan::diff
