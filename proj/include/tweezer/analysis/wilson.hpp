#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "tweezer/core/error.hpp"

namespace tweezer::analysis {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    double half_width() const { return 0.5 * (hi - lo); }
    bool contains(double x) const { return lo <= x && x <= hi; }
};

struct BinomialPoint {
    std::size_t successes = 0;
    std::size_t trials = 0;
    double abscissa = 0.0;

    double fraction() const { return static_cast<double>(successes) / static_cast<double>(trials); }
};

// Wilson score interval for k successes in n trials at z standard errors.
inline Interval wilson_interval(std::size_t k, std::size_t n, double z = 1.96) {
    if (n == 0) fail(Errc::EmptySample, "Wilson interval needs at least one trial");
    if (k > n) fail(Errc::InvalidArgument, "successes exceed trials");
    if (!(z > 0.0)) fail(Errc::InvalidArgument, "z must be positive");
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(k) / nn;
    const double z2n = z * z / nn;
    const double denom = 1.0 + z2n;
    const double center = (p + 0.5 * z2n) / denom;
    const double half = (z / denom) * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn));
    Interval out{std::clamp(center - half, 0.0, 1.0), std::clamp(center + half, 0.0, 1.0)};
    if (k == 0) out.lo = 0.0;
    if (k == n) out.hi = 1.0;
    return out;
}

inline Interval wilson_interval(const BinomialPoint& pt, double z = 1.96) {
    return wilson_interval(pt.successes, pt.trials, z);
}

// Default least-squares weight: inverse squared Wilson half-width.
inline double wilson_weight(std::size_t k, std::size_t n, double z = 1.96) {
    const double hw = wilson_interval(k, n, z).half_width();
    return 1.0 / (hw * hw);
}

}  // namespace tweezer::analysis
