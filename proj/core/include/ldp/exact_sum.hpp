#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace ldp {

// Neumaier-compensated sum. Deterministic for a fixed element order.
inline double compensated_sum(std::span<const double> values) {
    double sum = 0.0;
    double c   = 0.0;
    for (double x : values) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    return sum + c;
}

// Permutation-invariant sum: identical multisets of addends produce a
// bit-identical result regardless of their order in memory. Sorting fixes
// the accumulation order; the compensated pass keeps the rounding error
// near one ulp.
inline double stable_sum(std::span<const double> values, std::vector<double>& scratch) {
    scratch.assign(values.begin(), values.end());
    std::sort(scratch.begin(), scratch.end());
    return compensated_sum(scratch);
}

inline double stable_sum(std::span<const double> values) {
    std::vector<double> scratch;
    return stable_sum(values, scratch);
}

}  // namespace ldp
