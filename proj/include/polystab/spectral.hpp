#pragma once

// Spectrum construction for the operator L in every scenario family:
//   - 1D constant coefficient on (0, length): lambda_k = (k pi / length)^2
//   - 1D two-piece constant coefficient: closed-form branches for the
//     reference example, bracketed secular root finding otherwise
//   - 1D Sturm-Liouville with smooth coefficients: flux-form finite
//     differences on a uniform grid
//   - N-D rectangles: lattice enumeration with exact rational grouping when
//     every squared-length ratio is rational
//
// A built Spectrum is immutable: ordered distinct eigenvalues, multiplicities,
// and pointwise-evaluable eigenfunction descriptors (value and gradient; the
// Kelvin-Voigt form needs gradients).

#include "polystab/errors.hpp"
#include "polystab/ratio.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace polystab::spectral {

struct Domain1D {
    double length;
    explicit Domain1D(double len) : length(len) {
        if (!(len > 0.0))
            throw InvalidArgument("Domain1D: length must be positive");
    }
};

struct RectangleDomain {
    std::vector<double> lengths;
    // Optional exact squared-length ratios xi_j = L_1^2 / L_j^2 for j >= 2.
    // When absent, rationality is detected from the floating lengths; when
    // detection fails the spectrum falls back to tolerance-based grouping.
    std::optional<std::vector<RationalRatio>> squared_ratios;

    explicit RectangleDomain(std::vector<double> lens,
                             std::optional<std::vector<RationalRatio>> ratios = std::nullopt)
        : lengths(std::move(lens)), squared_ratios(std::move(ratios)) {
        if (lengths.size() < 2)
            throw InvalidArgument("RectangleDomain: need N >= 2 lengths");
        for (double L : lengths)
            if (!(L > 0.0))
                throw InvalidArgument("RectangleDomain: lengths must be positive");
        if (squared_ratios && squared_ratios->size() != lengths.size() - 1)
            throw InvalidArgument("RectangleDomain: need N-1 squared ratios");
    }
};

// 1D coefficient data for -(a u')' + q u = lambda rho u.
struct Coefficient1D {
    enum class Kind { Constant, PiecewiseConstant, Smooth };
    Kind kind = Kind::Constant;

    double value = 1.0; // Constant

    std::vector<double> breakpoints; // PiecewiseConstant, strictly increasing
    std::vector<double> values;      // size breakpoints.size() + 1

    // Smooth: uniform samples on [0, length] including both endpoints.
    double length = 0.0;
    std::vector<double> a_samples, rho_samples, q_samples;

    static Coefficient1D constant(double v);
    static Coefficient1D piecewise(std::vector<double> breakpoints, std::vector<double> values);
    static Coefficient1D smooth(const std::function<double(double)> &a,
                                const std::function<double(double)> &rho,
                                const std::function<double(double)> &q,
                                double length, int n_samples);

    double a_at(double x) const;
    double rho_at(double x) const;
    double q_at(double x) const;
};

// --- Eigenfunction descriptors --------------------------------------------

// phi(x) = norm * sin(k pi x / L) with norm = sqrt(2/L).
struct SineMode {
    int k = 1;
    double length = 0.0;
    double wavenumber() const;
    double value(double x) const;
    double derivative(double x) const;
    double second_derivative(double x) const;
};

// Two-piece trigonometric mode on (0, L) with breakpoint c:
//   phi(x) = amp_left  * sin(wav_left * x)        on (0, c)
//   phi(x) = amp_right * sin(wav_right * (L - x)) on (c, L)
// Amplitudes already include the overall L^2 normalization; the stored
// branch/branch_index identify the closed-form family when one applies.
struct PiecewiseTrigMode {
    double length = 0.0, breakpoint = 0.0;
    double amp_left = 0.0, wav_left = 0.0;
    double amp_right = 0.0, wav_right = 0.0;
    int branch = 0;       // 1 or 2 for the closed-form branches, 0 for secular
    int branch_index = 0; // m (branch 1) or n (branch 2)
    double value(double x) const;
    double derivative(double x) const;
    double second_derivative(double x) const;
};

// Tensor sine mode on a box: phi(x) = prod_j sqrt(2/L_j) sin(n_j pi x_j / L_j).
struct ProductSineMode {
    std::vector<int> n;
    std::vector<double> lengths;
    double wavenumber(std::size_t j) const;
    double value(std::span<const double> x) const;
    void gradient(std::span<const double> x, std::span<double> out) const;
};

// Grid samples of phi and phi' on a uniform grid over [0, L] (both endpoints
// included); evaluation is linear interpolation.
struct GridMode {
    double length = 0.0;
    std::vector<double> phi, dphi;
    double value(double x) const;
    double derivative(double x) const;
};

using EigenFunction = std::variant<SineMode, PiecewiseTrigMode, ProductSineMode, GridMode>;

// Pointwise evaluation helpers for 1D descriptors.
double value_1d(const EigenFunction &f, double x);
double derivative_1d(const EigenFunction &f, double x);

struct SpectrumEntry {
    double lambda = 0.0;
    int multiplicity = 1;
    std::vector<EigenFunction> modes;       // one per multiplicity
    std::vector<std::vector<int>> index_set; // J_k for lattice spectra
    std::string branch;                      // closed-form branch tag, if any
};

// Exact integer representation lambda_k = unit * scaled[k] / scale, available
// when all squared-length ratios are rational.  Gap bounds from the lattice
// lemmas are exact and must not be blurred by rounding.
struct ExactValues {
    std::vector<long long> scaled;
    long long scale = 1;
    double unit = 1.0;
};

class Spectrum {
public:
    Spectrum(std::vector<SpectrumEntry> entries, std::optional<ExactValues> exact = std::nullopt);

    std::size_t size() const { return entries_.size(); }
    // k is 1-based throughout, matching the eigenvalue numbering.
    const SpectrumEntry &entry(std::size_t k) const;
    double lambda(std::size_t k) const { return entry(k).lambda; }
    std::span<const SpectrumEntry> entries() const { return entries_; }

    // min over stored k of lambda_k / lambda_{k+1}
    double lambda_star() const;

    const std::optional<ExactValues> &exact() const { return exact_; }

    // Count of flattened modes in eigenspaces 1..k.
    std::size_t flattened_count(std::size_t k) const;

    // One record per distinct eigenvalue: k, lambda, multiplicity, index set
    // or branch tag.
    void write_report(std::ostream &os) const;

private:
    std::vector<SpectrumEntry> entries_;
    std::optional<ExactValues> exact_;
    std::vector<std::size_t> cum_modes_;
};

// --- Builders ---------------------------------------------------------------

Spectrum build_spectrum_1d_constant(const Domain1D &domain, int k_max);

// Interface matching convention for the two-piece secular solver.  Flux
// continuity (phi, a phi') is the divergence-form convention; derivative
// continuity (phi, phi') solves the equivalent density-form problem
// -phi'' = lambda phi / a and is the convention the closed-form reference
// branches satisfy.
enum class InterfaceMatching { FluxContinuity, DerivativeContinuity };

// Two-piece constant coefficient.  For the reference data (pieces 1 and 4,
// breakpoint L/2 on (0, pi)) the closed-form branch union is returned with
// branch amplitudes; other data is solved by bracketed bisection on the
// secular function.  Passing `matching` forces the secular path.
Spectrum build_spectrum_1d_piecewise(const Domain1D &domain, const Coefficient1D &coeff,
                                     int k_max,
                                     std::optional<InterfaceMatching> matching = std::nullopt);

Spectrum build_spectrum_sturm_liouville(const Domain1D &domain, const Coefficient1D &coeff,
                                        int grid_size, int k_max);

Spectrum build_spectrum_rectangle(const RectangleDomain &domain, double lambda_cap,
                                  long long tuple_budget = 50'000'000);

// --- Liouville asymptotics ---------------------------------------------------

struct LiouvilleAsymptotics {
    double ell = 0.0; // integral of a^{-1/2} over the domain
    double C1 = 0.0;  // fitted offset
    double C2 = 0.0;  // normalization-consistent amplitude sqrt(2/ell)
    double fitted_leading = 0.0;
    std::vector<double> residuals; // c_k = lambda_k - (fitted_leading k^2 + C1)

    enum class LeadingMatch { EllSquared, PiOverEllSquared, Neither };
    LeadingMatch match = LeadingMatch::Neither;
    double rel_err_ell_sq = 0.0;
    double rel_err_pi_over_ell_sq = 0.0;

    // Monotone map x -> xi(x), sampled on a uniform grid over [0, L];
    // xi(0) = 0 and xi(L) = pi by construction.
    std::vector<double> xi_x, xi_val;
    double xi_at(double x) const;
};

LiouvilleAsymptotics liouville_asymptotics(const Spectrum &spectrum, const Coefficient1D &coeff);

} // namespace polystab::spectral
