#pragma once

// Exact positive rationals p/q used for squared-length ratios of rectangle
// domains and for the gap lemmas.  Stored coprime.

#include "polystab/errors.hpp"

#include <numeric>

namespace polystab {

struct RationalRatio {
    long long p = 1;
    long long q = 1;

    RationalRatio() = default;
    RationalRatio(long long p_, long long q_) : p(p_), q(q_) {
        if (p < 1 || q < 1)
            throw InvalidArgument("RationalRatio: p and q must be >= 1");
        const long long g = std::gcd(p, q);
        p /= g;
        q /= g;
    }

    double value() const { return static_cast<double>(p) / static_cast<double>(q); }
};

// lcm with overflow detection; throws ResourceLimit past 64-bit range.
inline long long checked_lcm(long long a, long long b) {
    const long long g = std::gcd(a, b);
    long long res = 0;
    if (__builtin_mul_overflow(a / g, b, &res))
        throw ResourceLimit("lcm exceeds 64-bit integer range");
    return res;
}

} // namespace polystab
