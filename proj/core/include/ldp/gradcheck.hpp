#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "ldp/tensor.hpp"

namespace ldp {

// Central-difference gradient of a scalar function. Independent of any
// analytic gradient path: it only ever evaluates f.
inline Tensor central_difference_gradient(const std::function<double(const Tensor&)>& f,
                                          const Tensor& x, double step = 1e-5) {
    Tensor grad(x.shape());
    Tensor probe = x;
    for (int64_t i = 0; i < x.size(); ++i) {
        const double original = probe[i];
        probe[i] = original + step;
        const double plus = f(probe);
        probe[i] = original - step;
        const double minus = f(probe);
        probe[i] = original;
        grad[i]  = (plus - minus) / (2.0 * step);
    }
    return grad;
}

// ||a - b||_inf / max(||a||_inf, ||b||_inf, scale_floor). A nonzero
// scale_floor keeps the ratio meaningful when the true gradient is zero and
// both sides sit at the finite-difference noise floor.
inline double relative_error(const Tensor& a, const Tensor& b, double scale_floor = 0.0) {
    double diff = 0.0, scale = scale_floor;
    for (int64_t i = 0; i < a.size(); ++i) {
        diff  = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
    }
    if (scale == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / scale;
}

}  // namespace ldp
