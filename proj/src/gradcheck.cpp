#include "gswan/gradcheck.hpp"

#include <cmath>
#include <string>

#include "gswan/errors.hpp"

namespace gswan::diff {

namespace {

double eval_scalar(const ScalarFn& f, const Array& x, std::int64_t coord_for_error) {
    Tape tape;
    Var leaf = tape.leaf(x, "x");
    Var y = f(tape, leaf);
    if (y.value().size() != 1) throw std::invalid_argument("finite_difference_check: f must be scalar-valued");
    const double v = y.value()[0];
    if (!std::isfinite(v)) {
        throw NumericError("finite_difference_check: non-finite value at coordinate " + std::to_string(coord_for_error));
    }
    return v;
}

double rel_error(double fd, double analytic) {
    const double denom = std::max({1e-8, std::fabs(fd), std::fabs(analytic)});
    return std::fabs(fd - analytic) / denom;
}

}  // namespace

double finite_difference_check(const ScalarFn& f, const Array& x0, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_check: step must be positive");
    Array analytic;
    {
        Tape tape;
        Var leaf = tape.leaf(x0, "x");
        Var y = f(tape, leaf);
        if (y.value().size() != 1) throw std::invalid_argument("finite_difference_check: f must be scalar-valued");
        tape.backward(y);
        analytic = tape.grad(leaf);
    }
    double worst = 0.0;
    Array x = x0;
    for (std::int64_t i = 0; i < x0.size(); ++i) {
        const double step = h * std::max(1.0, std::fabs(x0[i]));
        x[i] = x0[i] + step;
        const double fp = eval_scalar(f, x, i);
        x[i] = x0[i] - step;
        const double fm = eval_scalar(f, x, i);
        x[i] = x0[i];
        const double fd = (fp - fm) / (2.0 * step);
        worst = std::max(worst, rel_error(fd, analytic[i]));
    }
    return worst;
}

double finite_difference_check_raw(const std::function<double(const Array&)>& f, const Array& x0,
                                   const Array& analytic_grad, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_check: step must be positive");
    if (!analytic_grad.same_shape(x0)) {
        throw std::invalid_argument("finite_difference_check: gradient shape " + analytic_grad.shape().str() +
                                    " does not match input " + x0.shape().str());
    }
    double worst = 0.0;
    Array x = x0;
    for (std::int64_t i = 0; i < x0.size(); ++i) {
        const double step = h * std::max(1.0, std::fabs(x0[i]));
        x[i] = x0[i] + step;
        const double fp = f(x);
        x[i] = x0[i] - step;
        const double fm = f(x);
        x[i] = x0[i];
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_difference_check: non-finite value at coordinate " + std::to_string(i));
        }
        const double fd = (fp - fm) / (2.0 * step);
        worst = std::max(worst, rel_error(fd, analytic_grad[i]));
    }
    return worst;
}

}  // namespace gswan::diff
