#pragma once

// Log-log envelope and least-squares line fits shared by the exponent-fitting
// operations (gamma0, gamma1, resolvent growth, decay rate).
//
// The envelope fit answers: what is the smallest slope gamma such that a line
// y = log(c0) + gamma*x passes through two data points and dominates all of
// them?  Lines through two points that dominate the data set are exactly the
// edges of the upper convex hull, whose slopes decrease from left to right,
// so the answer is the slope of the rightmost hull edge.  This is the fit
// appropriate for uniform inequalities of the form beta_k <= c0 * lambda_k^g:
// a least-squares regression would understate c0.

#include <cstddef>
#include <span>
#include <vector>

namespace polystab {

struct EnvelopeFit {
    double slope = 0.0;      // fitted exponent
    double intercept = 0.0;  // log(c0); the line is y = intercept + slope*x
    std::size_t lo = 0;      // indices (into the x-sorted data) of the two
    std::size_t hi = 0;      // points where equality is attained
    // Largest amount by which any point exceeds the fitted line; should be
    // <= a few ULPs, kept for assertions.
    double max_violation = 0.0;
};

// Upper-convex-hull envelope of (x_i, y_i); returns the rightmost hull edge.
// Points with equal x are collapsed to their max y.  Requires >= 2 distinct
// abscissae (InsufficientData otherwise).
EnvelopeFit fit_upper_envelope(std::span<const double> x, std::span<const double> y);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

// Ordinary least squares of y against x.  Requires >= 2 points.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

} // namespace polystab
