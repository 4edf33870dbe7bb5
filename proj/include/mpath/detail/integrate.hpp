#pragma once

#include <cmath>

namespace mpath {

namespace detail {

template <class F>
double simpson_step(F& f, double a, double fa, double b, double fb, double m, double fm,
                    double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

template <class F>
double integrate(F&& f, double a, double b, double tol, int max_depth) {
    // Split into 8 panels first so narrow peaks are not skipped.
    constexpr int panels = 8;
    const double h = (b - a) / panels;
    double sum = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double lo = a + k * h, hi = (k + 1 == panels) ? b : a + (k + 1) * h;
        const double m = 0.5 * (lo + hi);
        const double flo = f(lo), fhi = f(hi), fm = f(m);
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
        sum += detail::simpson_step(f, lo, flo, hi, fhi, m, fm, whole, tol / panels, max_depth);
    }
    return sum;
}

}  // namespace mpath
