#pragma once

// Damping form <B phi, psi> = int b1 phi conj(psi) + int b2 grad phi . grad conj(psi)
// assembled on mode truncations: Gram blocks, the nondegeneracy constants
// beta_k = 1 / min spec of the k-th eigenspace block, the operator norm
// ||B||_{H1 -> H-1}, and the envelope fit of beta_k <= c0 lambda_k^{gamma0}.

#include "polystab/spectral.hpp"

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace polystab::damping {

struct Box {
    std::vector<double> lo, hi;
    Box() = default;
    Box(std::vector<double> lo_, std::vector<double> hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
        if (lo.size() != hi.size() || lo.empty())
            throw InvalidArgument("Box: lo/hi dimension mismatch");
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(hi[i] > lo[i]))
                throw InvalidArgument("Box: hi must exceed lo in every coordinate");
    }
    std::size_t dim() const { return lo.size(); }
};

struct DampingRegion {
    Box box;
    double floor_value = 0.0; // coefficient value on the box (the floor eps_j)
};

// b1 (viscous) and b2 (Kelvin-Voigt) as finite unions of constant boxes,
// optionally augmented by nonnegative samplers (1D only).
struct DampingConfig {
    std::vector<DampingRegion> b1_regions, b2_regions;
    std::function<double(double)> b1_sampler, b2_sampler;

    // at least one strictly positive floor or a sampler must be present
    void validate(std::span<const double> domain_lengths) const;
};

struct QuadratureOptions {
    int panels_per_oscillation = 64; // < 4 is refused
};

// Hermitian Gram matrix of the damping form over the flattened modes of a
// contiguous eigenspace range [k_lo, k_hi] (1-based, inclusive).
struct GramMatrix {
    Eigen::MatrixXd g;
    std::size_t k_lo = 1, k_hi = 0;
    std::vector<int> block_offset, block_size; // per eigenspace in range
    std::vector<double> lambda_flat;

    std::size_t modes() const { return lambda_flat.size(); }
    // k is the absolute eigenspace index
    Eigen::MatrixXd block(std::size_t k) const;
};

GramMatrix assemble_gram(const spectral::Spectrum &spectrum, const DampingConfig &damping,
                         std::size_t k_lo, std::size_t k_hi, const QuadratureOptions &quad = {});

// beta_k = 1 / (smallest eigenvalue of the k-th diagonal block); the minimum
// of a Hermitian form over the unit sphere is its smallest eigenvalue.
double compute_beta(const spectral::Spectrum &spectrum, const GramMatrix &gram, std::size_t k);

struct NormBEstimate {
    double value = 0.0;
    std::size_t eigenspaces = 0; // truncation level of the estimate
};

// Largest eigenvalue of D^{-1/2} G D^{-1/2} with D = diag(lambda_i): the
// finite section of L^{-1/2} B L^{-1/2}; non-decreasing in the truncation.
NormBEstimate estimate_norm_B(const spectral::Spectrum &spectrum, const GramMatrix &gram);

struct BetaPoint {
    std::size_t k = 0;
    double lambda = 0.0;
    int multiplicity = 1;
    double beta = 0.0;
};

// Per-eigenspace beta over [k_lo, k_hi], assembling each diagonal block
// independently (no cross-eigenspace entries are needed).  For spectra with
// tolerance-based grouping, the block's smallest eigenvalue is recomputed
// under +-1 grouping perturbations of near-degenerate neighbours and the
// worst case is reported.
std::vector<BetaPoint> beta_points(const spectral::Spectrum &spectrum, const DampingConfig &damping,
                                   std::size_t k_lo, std::size_t k_hi,
                                   const QuadratureOptions &quad = {});

struct BetaReport {
    std::vector<BetaPoint> points;
    double gamma0 = 0.0;
    double c0 = 0.0;

    // rows (k, lambda, m_k, beta, bound c0 lambda^gamma0)
    void write_report(std::ostream &os) const;
};

// Envelope fit of log beta_k against log lambda_k: the smallest exponent
// achieved by a two-point line of the upper convex hull that dominates all
// points, with (gamma0, c0) attaining equality on the hull.
BetaReport fit_gamma0(std::vector<BetaPoint> points);

} // namespace polystab::damping
