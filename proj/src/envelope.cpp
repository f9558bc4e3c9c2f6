#include "polystab/envelope.hpp"

#include "polystab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace polystab {

EnvelopeFit fit_upper_envelope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw InvalidArgument("fit_upper_envelope: x/y size mismatch");

    // Sort by x, collapsing duplicate abscissae to their maximal ordinate.
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

    std::vector<double> xs, ys;
    std::vector<std::size_t> src; // original index of each kept point
    xs.reserve(x.size());
    ys.reserve(x.size());
    for (std::size_t idx : order) {
        if (!xs.empty() && x[idx] == xs.back()) {
            if (y[idx] > ys.back()) {
                ys.back() = y[idx];
                src.back() = idx;
            }
        } else {
            xs.push_back(x[idx]);
            ys.push_back(y[idx]);
            src.push_back(idx);
        }
    }
    if (xs.size() < 2)
        throw InsufficientData("fit_upper_envelope: need at least 2 distinct abscissae");

    // Monotone-chain upper hull: successive edge slopes strictly decrease.
    std::vector<std::size_t> hull; // indices into xs/ys
    for (std::size_t i = 0; i < xs.size(); ++i) {
        while (hull.size() >= 2) {
            std::size_t a = hull[hull.size() - 2], b = hull[hull.size() - 1];
            // Drop b if it lies on or below chord a--i.
            double cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) -
                           (ys[b] - ys[a]) * (xs[i] - xs[a]);
            if (cross >= 0.0)
                hull.pop_back();
            else
                break;
        }
        hull.push_back(i);
    }

    std::size_t a = hull[hull.size() - 2], b = hull[hull.size() - 1];
    EnvelopeFit fit;
    fit.slope = (ys[b] - ys[a]) / (xs[b] - xs[a]);
    fit.intercept = ys[b] - fit.slope * xs[b];
    fit.lo = src[a];
    fit.hi = src[b];
    fit.max_violation = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        fit.max_violation =
            std::max(fit.max_violation, ys[i] - (fit.intercept + fit.slope * xs[i]));
    return fit;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw InvalidArgument("fit_line: x/y size mismatch");
    if (x.size() < 2)
        throw InsufficientData("fit_line: need at least 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0)
        throw InvalidArgument("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

} // namespace polystab
