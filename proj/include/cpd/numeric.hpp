#pragma once

#include <cmath>
#include <functional>
#include <utility>

namespace cpd {

// Golden-section search for the maximiser of a unimodal function on [lo, hi].
// Returns (argmax, max).
inline std::pair<double, double> golden_section_max(const std::function<double(double)>& f,
                                                    double lo, double hi, double tol = 1e-8) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tol * (1.0 + std::abs(a) + std::abs(b)) * 0.5) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    const double x = 0.5 * (a + b);
    double best = f(x);
    double arg = x;
    // Endpoints matter for monotone objectives clipped by the interval.
    if (const double fl = f(lo); fl > best) {
        best = fl;
        arg = lo;
    }
    if (const double fh = f(hi); fh > best) {
        best = fh;
        arg = hi;
    }
    return {arg, best};
}

// Root of an increasing function on [lo, hi] by bisection.
inline double bisect_increasing(const std::function<double(double)>& f, double target, double lo,
                                double hi, int max_iter = 200) {
    for (int i = 0; i < max_iter && hi - lo > 1e-15 * (1.0 + std::abs(lo) + std::abs(hi)); ++i) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace cpd
