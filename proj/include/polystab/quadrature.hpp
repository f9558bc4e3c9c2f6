#pragma once

// Composite Simpson quadrature and closed-form trigonometric product
// integrals.  The trig primitives are the workhorses of the Gram assembly:
// every entry of the damping form over a box reduces to integrals of
// sin(a x + p) sin(b x + q) and cos(a x + p) cos(b x + q).

#include <cmath>
#include <functional>

namespace polystab {

// Composite Simpson on [a, b] with n panels (n rounded up to even).
inline double simpson(const std::function<double(double)> &f, double a, double b, int n) {
    if (b <= a) return 0.0;
    if (n < 2) n = 2;
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i)
        s += f(a + i * h) * ((i % 2) ? 4.0 : 2.0);
    return s * h / 3.0;
}

namespace detail {
// Integral of cos(w x + p) over [a, b], stable as w -> 0.
inline double int_cos(double w, double p, double a, double b) {
    if (std::abs(w) * (b - a) < 1e-9) {
        // cos is effectively constant on [a,b] at this wavenumber
        const double mid = 0.5 * (a + b);
        return std::cos(w * mid + p) * (b - a);
    }
    return (std::sin(w * b + p) - std::sin(w * a + p)) / w;
}
} // namespace detail

// Integral over [a, b] of sin(wa x + pa) * sin(wb x + pb).
inline double trig_sin_sin(double wa, double pa, double wb, double pb, double a, double b) {
    // product-to-sum: 1/2 [cos((wa-wb)x + (pa-pb)) - cos((wa+wb)x + (pa+pb))]
    return 0.5 * (detail::int_cos(wa - wb, pa - pb, a, b) -
                  detail::int_cos(wa + wb, pa + pb, a, b));
}

// Integral over [a, b] of cos(wa x + pa) * cos(wb x + pb).
inline double trig_cos_cos(double wa, double pa, double wb, double pb, double a, double b) {
    return 0.5 * (detail::int_cos(wa - wb, pa - pb, a, b) +
                  detail::int_cos(wa + wb, pa + pb, a, b));
}

} // namespace polystab
