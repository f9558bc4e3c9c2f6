#include "polystab/spectral.hpp"

#include "polystab/envelope.hpp"
#include "polystab/quadrature.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace polystab::spectral {

namespace {
constexpr double kPi = std::numbers::pi;
}

// --- Coefficient1D -----------------------------------------------------------

Coefficient1D Coefficient1D::constant(double v) {
    if (!(v > 0.0))
        throw InvalidArgument("Coefficient1D: constant value must be positive");
    Coefficient1D c;
    c.kind = Kind::Constant;
    c.value = v;
    return c;
}

Coefficient1D Coefficient1D::piecewise(std::vector<double> breakpoints, std::vector<double> values) {
    if (values.size() != breakpoints.size() + 1)
        throw InvalidArgument("Coefficient1D: need one more value than breakpoints");
    for (std::size_t i = 1; i < breakpoints.size(); ++i)
        if (!(breakpoints[i] > breakpoints[i - 1]))
            throw InvalidArgument("Coefficient1D: breakpoints must be strictly increasing");
    for (double v : values)
        if (!(v > 0.0))
            throw InvalidArgument("Coefficient1D: piece values must be positive");
    Coefficient1D c;
    c.kind = Kind::PiecewiseConstant;
    c.breakpoints = std::move(breakpoints);
    c.values = std::move(values);
    return c;
}

Coefficient1D Coefficient1D::smooth(const std::function<double(double)> &a,
                                    const std::function<double(double)> &rho,
                                    const std::function<double(double)> &q, double length,
                                    int n_samples) {
    if (!(length > 0.0))
        throw InvalidArgument("Coefficient1D: length must be positive");
    if (n_samples < 8)
        throw InvalidArgument("Coefficient1D: need at least 8 samples");
    Coefficient1D c;
    c.kind = Kind::Smooth;
    c.length = length;
    c.a_samples.resize(n_samples + 1);
    c.rho_samples.resize(n_samples + 1);
    c.q_samples.resize(n_samples + 1);
    for (int i = 0; i <= n_samples; ++i) {
        const double x = length * i / n_samples;
        c.a_samples[i] = a(x);
        c.rho_samples[i] = rho(x);
        c.q_samples[i] = q(x);
        if (!(c.a_samples[i] > 0.0) || !(c.rho_samples[i] > 0.0))
            throw InvalidArgument("Coefficient1D: a and rho must stay positive");
    }
    return c;
}

namespace {
double interp_uniform(const std::vector<double> &s, double length, double x) {
    const int n = static_cast<int>(s.size()) - 1;
    double t = x / length * n;
    if (t <= 0.0) return s.front();
    if (t >= n) return s.back();
    const int i = static_cast<int>(t);
    const double f = t - i;
    return s[i] * (1.0 - f) + s[i + 1] * f;
}
} // namespace

double Coefficient1D::a_at(double x) const {
    switch (kind) {
    case Kind::Constant:
        return value;
    case Kind::PiecewiseConstant: {
        std::size_t i = 0;
        while (i < breakpoints.size() && x >= breakpoints[i]) ++i;
        return values[i];
    }
    case Kind::Smooth:
        return interp_uniform(a_samples, length, x);
    }
    return value;
}

double Coefficient1D::rho_at(double x) const {
    if (kind == Kind::Smooth)
        return interp_uniform(rho_samples, length, x);
    return 1.0;
}

double Coefficient1D::q_at(double x) const {
    if (kind == Kind::Smooth)
        return interp_uniform(q_samples, length, x);
    return 0.0;
}

// --- Descriptors -------------------------------------------------------------

double SineMode::wavenumber() const { return k * kPi / length; }

double SineMode::value(double x) const {
    return std::sqrt(2.0 / length) * std::sin(wavenumber() * x);
}

double SineMode::derivative(double x) const {
    const double w = wavenumber();
    return std::sqrt(2.0 / length) * w * std::cos(w * x);
}

double SineMode::second_derivative(double x) const {
    const double w = wavenumber();
    return -std::sqrt(2.0 / length) * w * w * std::sin(w * x);
}

double PiecewiseTrigMode::value(double x) const {
    if (x <= breakpoint)
        return amp_left * std::sin(wav_left * x);
    return amp_right * std::sin(wav_right * (length - x));
}

double PiecewiseTrigMode::derivative(double x) const {
    if (x <= breakpoint)
        return amp_left * wav_left * std::cos(wav_left * x);
    return -amp_right * wav_right * std::cos(wav_right * (length - x));
}

double PiecewiseTrigMode::second_derivative(double x) const {
    if (x <= breakpoint)
        return -amp_left * wav_left * wav_left * std::sin(wav_left * x);
    return -amp_right * wav_right * wav_right * std::sin(wav_right * (length - x));
}

double ProductSineMode::wavenumber(std::size_t j) const { return n[j] * kPi / lengths[j]; }

double ProductSineMode::value(std::span<const double> x) const {
    double v = 1.0;
    for (std::size_t j = 0; j < n.size(); ++j)
        v *= std::sqrt(2.0 / lengths[j]) * std::sin(wavenumber(j) * x[j]);
    return v;
}

void ProductSineMode::gradient(std::span<const double> x, std::span<double> out) const {
    for (std::size_t j = 0; j < n.size(); ++j) {
        double g = 1.0;
        for (std::size_t i = 0; i < n.size(); ++i) {
            const double w = wavenumber(i);
            const double norm = std::sqrt(2.0 / lengths[i]);
            g *= (i == j) ? norm * w * std::cos(w * x[i]) : norm * std::sin(w * x[i]);
        }
        out[j] = g;
    }
}

double GridMode::value(double x) const { return interp_uniform(phi, length, x); }
double GridMode::derivative(double x) const { return interp_uniform(dphi, length, x); }

double value_1d(const EigenFunction &f, double x) {
    return std::visit(
        [x](const auto &m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ProductSineMode>)
                throw InvalidArgument("value_1d: descriptor is not one-dimensional");
            else
                return m.value(x);
        },
        f);
}

double derivative_1d(const EigenFunction &f, double x) {
    return std::visit(
        [x](const auto &m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ProductSineMode>)
                throw InvalidArgument("derivative_1d: descriptor is not one-dimensional");
            else
                return m.derivative(x);
        },
        f);
}

// --- Spectrum ----------------------------------------------------------------

Spectrum::Spectrum(std::vector<SpectrumEntry> entries, std::optional<ExactValues> exact)
    : entries_(std::move(entries)), exact_(std::move(exact)) {
    if (entries_.empty())
        throw InvalidArgument("Spectrum: no entries");
    if (!(entries_.front().lambda > 0.0))
        throw NumericalError("Spectrum: least eigenvalue must be positive");
    for (std::size_t i = 1; i < entries_.size(); ++i)
        if (!(entries_[i].lambda > entries_[i - 1].lambda))
            throw NumericalError("Spectrum: eigenvalues must be strictly increasing");
    cum_modes_.resize(entries_.size());
    std::size_t acc = 0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        acc += entries_[i].multiplicity;
        cum_modes_[i] = acc;
    }
}

const SpectrumEntry &Spectrum::entry(std::size_t k) const {
    if (k < 1 || k > entries_.size())
        throw InvalidArgument("Spectrum::entry: index out of range");
    return entries_[k - 1];
}

double Spectrum::lambda_star() const {
    double ls = entries_[0].lambda / entries_.back().lambda + 1.0; // sentinel above any ratio
    for (std::size_t i = 0; i + 1 < entries_.size(); ++i)
        ls = std::min(ls, entries_[i].lambda / entries_[i + 1].lambda);
    return ls;
}

std::size_t Spectrum::flattened_count(std::size_t k) const {
    if (k < 1 || k > entries_.size())
        throw InvalidArgument("Spectrum::flattened_count: index out of range");
    return cum_modes_[k - 1];
}

void Spectrum::write_report(std::ostream &os) const {
    os << "k\tlambda\tmultiplicity\ttag\n";
    char buf[64];
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto &e = entries_[i];
        std::snprintf(buf, sizeof buf, "%.12g", e.lambda);
        os << (i + 1) << '\t' << buf << '\t' << e.multiplicity << '\t';
        if (!e.index_set.empty()) {
            for (std::size_t m = 0; m < e.index_set.size(); ++m) {
                os << '(';
                for (std::size_t j = 0; j < e.index_set[m].size(); ++j)
                    os << e.index_set[m][j] << (j + 1 < e.index_set[m].size() ? "," : "");
                os << ')';
            }
        } else if (!e.branch.empty()) {
            os << e.branch;
        } else {
            os << '-';
        }
        os << '\n';
    }
}

// --- 1D constant -------------------------------------------------------------

Spectrum build_spectrum_1d_constant(const Domain1D &domain, int k_max) {
    if (k_max < 1)
        throw InvalidArgument("build_spectrum_1d_constant: k_max must be >= 1");
    std::vector<SpectrumEntry> entries;
    entries.reserve(k_max);
    for (int k = 1; k <= k_max; ++k) {
        SpectrumEntry e;
        const double w = k * kPi / domain.length;
        e.lambda = w * w;
        e.multiplicity = 1;
        e.modes.push_back(SineMode{k, domain.length});
        entries.push_back(std::move(e));
    }
    return Spectrum(std::move(entries));
}

// --- 1D two-piece constant ----------------------------------------------------

namespace {

// Unnormalized two-piece mode with left amplitude 1 and right amplitude b.
PiecewiseTrigMode make_two_piece(double L, double c, double mu, double a1, double a2, double b,
                                 int branch, int branch_index) {
    PiecewiseTrigMode m;
    m.length = L;
    m.breakpoint = c;
    m.wav_left = std::sqrt(mu / a1);
    m.wav_right = std::sqrt(mu / a2);
    m.amp_left = 1.0;
    m.amp_right = b;
    m.branch = branch;
    m.branch_index = branch_index;
    // L^2 normalization over both pieces, in closed form.
    const double int_left = trig_sin_sin(m.wav_left, 0.0, m.wav_left, 0.0, 0.0, c);
    const double int_right =
        trig_sin_sin(-m.wav_right, m.wav_right * L, -m.wav_right, m.wav_right * L, c, L);
    const double norm = std::sqrt(int_left + b * b * int_right);
    m.amp_left /= norm;
    m.amp_right /= norm;
    return m;
}

bool is_reference_piecewise(const Domain1D &domain, const Coefficient1D &coeff) {
    if (coeff.kind != Coefficient1D::Kind::PiecewiseConstant) return false;
    if (coeff.values.size() != 2) return false;
    const double eps = 1e-12;
    return std::abs(domain.length - kPi) < eps && std::abs(coeff.breakpoints[0] - kPi / 2) < eps &&
           std::abs(coeff.values[0] - 1.0) < eps && std::abs(coeff.values[1] - 4.0) < eps;
}

// Closed-form branch union for the reference coefficient (1 on (0,pi/2),
// 4 on (pi/2,pi)).  Branch 1: mu = 16 m^2 with second-piece factor
// 2 (-1)^m sin(2 m x); branch 2: mu = 16 (n + arctan(sqrt 2)/pi)^2 with
// second-piece factor (-1)^n (2 sqrt 3 / 3) sin(sqrt(mu) (pi - x) / 2).
Spectrum build_reference_piecewise(int k_max) {
    const double beta = std::atan(std::sqrt(2.0)) / kPi;
    struct Cand {
        double mu;
        int branch;
        int index;
    };
    std::vector<Cand> cands;
    const int range = k_max + 4;
    for (int m = 1; m <= range; ++m)
        cands.push_back({16.0 * m * m, 1, m});
    for (int n = -range; n <= range; ++n) {
        const double r = n + beta;
        cands.push_back({16.0 * r * r, 2, n});
    }
    std::sort(cands.begin(), cands.end(), [](const Cand &a, const Cand &b) { return a.mu < b.mu; });

    std::vector<SpectrumEntry> entries;
    for (int i = 0; i < k_max; ++i) {
        const Cand &c = cands[i];
        SpectrumEntry e;
        e.lambda = c.mu;
        e.multiplicity = 1;
        double amp_right;
        if (c.branch == 1) {
            // sin(2 m x) = -sin(2 m (pi - x)) for integer m, so the printed
            // factor 2 (-1)^m becomes 2 (-1)^{m+1} in the (L - x) form.
            amp_right = 2.0 * ((c.index % 2 == 0) ? -1.0 : 1.0);
            e.branch = "branch1(m=" + std::to_string(c.index) + ")";
        } else {
            amp_right = (2.0 * std::sqrt(3.0) / 3.0) * ((c.index % 2 == 0) ? 1.0 : -1.0);
            e.branch = "branch2(n=" + std::to_string(c.index) + ")";
        }
        e.modes.push_back(make_two_piece(kPi, kPi / 2, c.mu, 1.0, 4.0, amp_right, c.branch, c.index));
        entries.push_back(std::move(e));
    }
    return Spectrum(std::move(entries));
}

// Secular function for the two-piece problem at trial eigenvalue mu:
// matching of phi and of kappa * phi' at the breakpoint, where kappa is the
// piece value a for flux continuity and 1 for derivative continuity.
double secular(double mu, double L, double c, double a1, double a2, InterfaceMatching matching) {
    const double w1 = std::sqrt(mu / a1);
    const double w2 = std::sqrt(mu / a2);
    const double d = L - c;
    const double k1 = (matching == InterfaceMatching::FluxContinuity) ? a1 : 1.0;
    const double k2 = (matching == InterfaceMatching::FluxContinuity) ? a2 : 1.0;
    return k1 * w1 * std::cos(w1 * c) * std::sin(w2 * d) -
           k2 * w2 * std::sin(w1 * c) * std::cos(w2 * d);
}

Spectrum build_secular_piecewise(const Domain1D &domain, const Coefficient1D &coeff, int k_max,
                                 InterfaceMatching matching) {
    const double L = domain.length;
    const double c = coeff.breakpoints[0];
    const double a1 = coeff.values[0];
    const double a2 = coeff.values[1];
    if (!(c > 0.0 && c < L))
        throw InvalidArgument("build_spectrum_1d_piecewise: breakpoint outside (0, length)");

    // Scan in s = sqrt(mu).  Roots are spaced roughly pi / ell_phase where
    // ell_phase = c/sqrt(a1) + (L-c)/sqrt(a2); the scan step divides the
    // spacing of the slowest (most oscillatory) piece.
    const double phase_left = c / std::sqrt(a1);
    const double phase_right = (L - c) / std::sqrt(a2);
    const double step = kPi / std::max(phase_left, phase_right) / 32.0;
    const double s_budget = (k_max + 16) * kPi / (phase_left + phase_right) * 4.0;

    auto f = [&](double s) { return secular(s * s, L, c, a1, a2, matching); };

    std::vector<double> roots;
    double s_prev = step * 0.5;
    double f_prev = f(s_prev);
    for (double s = s_prev + step; s <= s_budget && roots.size() < static_cast<std::size_t>(k_max);
         s += step) {
        const double fs = f(s);
        if (f_prev == 0.0) {
            roots.push_back(s_prev);
        } else if (fs == 0.0) {
            roots.push_back(s);
        } else if ((f_prev < 0.0) != (fs < 0.0)) {
            double lo = s_prev, hi = s, flo = f_prev;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = f(mid);
                if (fm == 0.0) {
                    lo = hi = mid;
                    break;
                }
                if ((flo < 0.0) != (fm < 0.0))
                    hi = mid;
                else {
                    lo = mid;
                    flo = fm;
                }
                if (hi - lo < 1e-15 * hi) break;
            }
            roots.push_back(0.5 * (lo + hi));
        }
        s_prev = s;
        f_prev = fs;
    }
    if (roots.size() < static_cast<std::size_t>(k_max)) {
        std::ostringstream msg;
        msg << "build_spectrum_1d_piecewise: bracketed " << roots.size() << " roots of " << k_max
            << " requested before scan budget s <= " << s_budget;
        throw NumericalError(msg.str());
    }

    std::vector<SpectrumEntry> entries;
    for (int i = 0; i < k_max; ++i) {
        const double s = roots[i];
        const double mu = s * s;
        const double w1 = std::sqrt(mu / a1);
        const double w2 = std::sqrt(mu / a2);
        const double d = L - c;
        // Right amplitude from whichever matching row is better conditioned.
        const double sl = std::sin(w1 * c), sr = std::sin(w2 * d);
        const double cl = std::cos(w1 * c), cr = std::cos(w2 * d);
        const double k1 = (matching == InterfaceMatching::FluxContinuity) ? a1 : 1.0;
        const double k2 = (matching == InterfaceMatching::FluxContinuity) ? a2 : 1.0;
        double b;
        if (std::abs(sr) > std::abs(cr))
            b = sl / sr;
        else
            b = k1 * w1 * cl / (k2 * w2 * cr);
        SpectrumEntry e;
        e.lambda = mu;
        e.multiplicity = 1;
        e.modes.push_back(make_two_piece(L, c, mu, a1, a2, b, 0, i + 1));
        entries.push_back(std::move(e));
    }
    return Spectrum(std::move(entries));
}

} // namespace

Spectrum build_spectrum_1d_piecewise(const Domain1D &domain, const Coefficient1D &coeff, int k_max,
                                     std::optional<InterfaceMatching> matching) {
    if (k_max < 1)
        throw InvalidArgument("build_spectrum_1d_piecewise: k_max must be >= 1");
    if (coeff.kind != Coefficient1D::Kind::PiecewiseConstant)
        throw InvalidArgument("build_spectrum_1d_piecewise: coefficient is not piecewise constant");
    if (coeff.values.size() != 2)
        throw Unsupported(
            "build_spectrum_1d_piecewise: more than two pieces; use build_spectrum_sturm_liouville");
    if (!matching && is_reference_piecewise(domain, coeff))
        return build_reference_piecewise(k_max);
    return build_secular_piecewise(domain, coeff, k_max,
                                   matching.value_or(InterfaceMatching::FluxContinuity));
}

// --- Sturm-Liouville finite differences ---------------------------------------

Spectrum build_spectrum_sturm_liouville(const Domain1D &domain, const Coefficient1D &coeff,
                                        int grid_size, int k_max) {
    if (k_max < 1)
        throw InvalidArgument("build_spectrum_sturm_liouville: k_max must be >= 1");
    if (grid_size < 20 * k_max)
        throw InvalidArgument("build_spectrum_sturm_liouville: grid_size must be >= 20 * k_max");

    const double L = domain.length;
    const int n = grid_size;
    const double h = L / n;
    const int ni = n - 1; // interior nodes

    // Flux-form discretization of -(a u')' + q u = lambda rho u keeps the
    // discrete pencil self-adjoint; the rho weight is folded in by the
    // diagonal similarity v = sqrt(rho) u.
    Eigen::VectorXd diag(ni), sub(ni - 1), rho(ni);
    for (int i = 1; i <= ni; ++i) {
        const double x = i * h;
        const double am = coeff.a_at(x - 0.5 * h);
        const double ap = coeff.a_at(x + 0.5 * h);
        rho(i - 1) = coeff.rho_at(x);
        diag(i - 1) = (am + ap) / (h * h) + coeff.q_at(x);
        if (i < ni) sub(i - 1) = -ap / (h * h);
    }
    for (int i = 0; i < ni; ++i)
        diag(i) /= rho(i);
    for (int i = 0; i + 1 < ni; ++i)
        sub(i) /= std::sqrt(rho(i) * rho(i + 1));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError("build_spectrum_sturm_liouville: tridiagonal eigensolver failed");
    const Eigen::VectorXd evals = es.eigenvalues();
    if (!(evals(0) > 0.0))
        throw NumericalError("build_spectrum_sturm_liouville: spectral positivity violated, "
                             "least eigenvalue <= 0");

    // Eigenvectors by inverse iteration; the shifted tridiagonal solve uses
    // Gaussian elimination with row pivoting (dgttrf-style, one fill-in band).
    auto solve_shifted = [&](double shift, Eigen::VectorXd rhs) {
        const int m = ni;
        std::vector<double> dd(m), du(m, 0.0), du2(m, 0.0);
        for (int i = 0; i < m; ++i) dd[i] = diag(i) - shift;
        for (int i = 0; i + 1 < m; ++i) du[i] = sub(i);
        for (int i = 0; i + 1 < m; ++i) {
            const double dl = sub(i);
            if (std::abs(dd[i]) >= std::abs(dl)) {
                const double f = (dd[i] != 0.0) ? dl / dd[i] : 0.0;
                dd[i + 1] -= f * du[i];
                rhs(i + 1) -= f * rhs(i);
                du2[i] = 0.0;
            } else {
                const double f = dd[i] / dl;
                const double old_d_next = dd[i + 1];
                const double old_du_i = du[i];
                const double old_du_next = (i + 2 < m) ? du[i + 1] : 0.0;
                dd[i] = dl;
                du[i] = old_d_next;
                du2[i] = old_du_next;
                dd[i + 1] = old_du_i - f * old_d_next;
                if (i + 2 < m) du[i + 1] = -f * old_du_next;
                std::swap(rhs(i), rhs(i + 1));
                rhs(i + 1) -= f * rhs(i);
            }
        }
        Eigen::VectorXd x(m);
        auto piv_div = [](double num, double den) {
            if (den == 0.0) den = 1e-300;
            return num / den;
        };
        x(m - 1) = piv_div(rhs(m - 1), dd[m - 1]);
        if (m >= 2) x(m - 2) = piv_div(rhs(m - 2) - du[m - 2] * x(m - 1), dd[m - 2]);
        for (int i = m - 3; i >= 0; --i)
            x(i) = piv_div(rhs(i) - du[i] * x(i + 1) - du2[i] * x(i + 2), dd[i]);
        return x;
    };
    auto inverse_iterate = [&](double shift) {
        Eigen::VectorXd v = Eigen::VectorXd::Ones(ni) / std::sqrt(double(ni));
        for (int iter = 0; iter < 5; ++iter) {
            v = solve_shifted(shift, v);
            v /= v.norm();
        }
        return v;
    };

    std::vector<SpectrumEntry> entries;
    entries.reserve(k_max);
    for (int k = 0; k < k_max; ++k) {
        const double lam = evals(k);
        const double gap_below = (k > 0) ? lam - evals(k - 1) : lam;
        const double gap_above = (k + 1 < ni) ? evals(k + 1) - lam : lam;
        const double shift = lam + 1e-6 * std::min(gap_below, gap_above);
        Eigen::VectorXd v = inverse_iterate(shift);

        // undo the similarity, normalize in the rho-weighted discrete product
        GridMode g;
        g.length = L;
        g.phi.assign(n + 1, 0.0);
        double nrm2 = 0.0;
        for (int i = 1; i <= ni; ++i) {
            g.phi[i] = v(i - 1) / std::sqrt(rho(i - 1));
            nrm2 += rho(i - 1) * g.phi[i] * g.phi[i] * h;
        }
        const double scale = 1.0 / std::sqrt(nrm2);
        for (auto &p : g.phi) p *= scale;
        // fix a deterministic sign: positive initial slope
        if (g.phi[1] < 0.0)
            for (auto &p : g.phi) p = -p;
        g.dphi.assign(n + 1, 0.0);
        for (int i = 1; i < n; ++i)
            g.dphi[i] = (g.phi[i + 1] - g.phi[i - 1]) / (2.0 * h);
        g.dphi[0] = (g.phi[1] - g.phi[0]) / h;
        g.dphi[n] = (g.phi[n] - g.phi[n - 1]) / h;

        SpectrumEntry e;
        e.lambda = lam;
        e.multiplicity = 1;
        e.modes.push_back(std::move(g));
        entries.push_back(std::move(e));
    }
    return Spectrum(std::move(entries));
}

// --- Rectangle lattice ---------------------------------------------------------

namespace {

// Continued-fraction rationalization of r with denominator cap; returns
// nullopt unless p/q reproduces r to 1e-12 relative.
std::optional<RationalRatio> rationalize(double r, long long q_cap) {
    if (!(r > 0.0)) return std::nullopt;
    double x = r;
    long long p0 = 1, q0 = 0;
    long long p1 = static_cast<long long>(std::floor(x)), q1 = 1;
    for (int it = 0; it < 64; ++it) {
        if (std::abs(static_cast<double>(p1) / q1 - r) <= 1e-12 * std::max(1.0, r)) {
            if (p1 < 1) return std::nullopt;
            return RationalRatio(p1, q1);
        }
        const double frac = x - std::floor(x);
        if (frac < 1e-15) break;
        x = 1.0 / frac;
        const double af = std::floor(x);
        if (af > 1e15) break;
        const long long a = static_cast<long long>(af);
        long long p2, q2;
        if (__builtin_mul_overflow(a, p1, &p2) || __builtin_add_overflow(p2, p0, &p2)) break;
        if (__builtin_mul_overflow(a, q1, &q2) || __builtin_add_overflow(q2, q0, &q2)) break;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        if (q1 > q_cap) break;
    }
    return std::nullopt;
}

} // namespace

Spectrum build_spectrum_rectangle(const RectangleDomain &domain, double lambda_cap,
                                  long long tuple_budget) {
    const std::size_t N = domain.lengths.size();
    double lambda_min = 0.0;
    for (double L : domain.lengths)
        lambda_min += kPi * kPi / (L * L);
    if (!(lambda_cap > lambda_min))
        throw InvalidArgument("build_spectrum_rectangle: lambda_cap must exceed pi^2 sum 1/L_j^2");

    // xi_j = L_1^2 / L_j^2; exact when all ratios are rational.
    std::vector<RationalRatio> ratios;
    bool exact = true;
    if (domain.squared_ratios) {
        ratios = *domain.squared_ratios;
    } else {
        for (std::size_t j = 1; j < N; ++j) {
            const double r = (domain.lengths[0] * domain.lengths[0]) /
                             (domain.lengths[j] * domain.lengths[j]);
            auto rr = rationalize(r, 100000);
            if (!rr) {
                exact = false;
                break;
            }
            ratios.push_back(*rr);
        }
    }
    if (domain.squared_ratios) exact = true;

    const double unit = kPi * kPi / (domain.lengths[0] * domain.lengths[0]);
    std::vector<double> xi(N, 1.0);
    if (exact)
        for (std::size_t j = 1; j < N; ++j)
            xi[j] = ratios[j - 1].value();
    else
        for (std::size_t j = 1; j < N; ++j)
            xi[j] = (domain.lengths[0] * domain.lengths[0]) /
                    (domain.lengths[j] * domain.lengths[j]);

    long long scale = 1;
    std::vector<long long> coeffs(N, 1); // integer coefficient of n_j^2 in scale * mu
    if (exact) {
        for (const auto &r : ratios) scale = checked_lcm(scale, r.q);
        for (std::size_t j = 1; j < N; ++j)
            coeffs[j] = ratios[j - 1].p * (scale / ratios[j - 1].q);
        coeffs[0] = scale;
    }

    const double mu_cap = lambda_cap / unit; // mu = n_1^2 + sum xi_j n_j^2

    struct Tuple {
        double mu;
        long long scaled;
        std::vector<int> n;
    };
    std::vector<Tuple> tuples;
    long long visited = 0;
    const double cap_slack = mu_cap * (1.0 + 1e-12);
    // minimal contribution of dimensions j..N-1 (all indices at 1)
    std::vector<double> suffix_min(N + 1, 0.0);
    for (std::size_t j = N; j-- > 0;)
        suffix_min[j] = suffix_min[j + 1] + xi[j];

    std::vector<int> idx(N, 1);
    std::function<void(std::size_t, double, long long)> enumerate =
        [&](std::size_t j, double mu_acc, long long scaled_acc) {
            if (j == N) {
                tuples.push_back({mu_acc, scaled_acc, idx});
                return;
            }
            for (int nj = 1;; ++nj) {
                const double term = xi[j] * static_cast<double>(nj) * static_cast<double>(nj);
                if (mu_acc + term + suffix_min[j + 1] > cap_slack) break;
                if (++visited > tuple_budget)
                    throw ResourceLimit(
                        "build_spectrum_rectangle: tuple enumeration exceeded budget");
                idx[j] = nj;
                enumerate(j + 1, mu_acc + term,
                          scaled_acc + (exact ? coeffs[j] * nj * nj : 0));
            }
            idx[j] = 1;
        };
    enumerate(0, 0.0, 0);

    if (exact)
        std::sort(tuples.begin(), tuples.end(), [](const Tuple &a, const Tuple &b) {
            return a.scaled != b.scaled ? a.scaled < b.scaled : a.n < b.n;
        });
    else
        std::sort(tuples.begin(), tuples.end(), [](const Tuple &a, const Tuple &b) {
            return a.mu != b.mu ? a.mu < b.mu : a.n < b.n;
        });

    std::vector<SpectrumEntry> entries;
    std::optional<ExactValues> exact_values;
    if (exact) exact_values = ExactValues{{}, scale, unit};

    const double tol_rel = 1e-9; // grouping tolerance 1e-9 * lambda for floating spectra
    for (std::size_t i = 0; i < tuples.size();) {
        std::size_t j = i + 1;
        if (exact) {
            while (j < tuples.size() && tuples[j].scaled == tuples[i].scaled) ++j;
        } else {
            while (j < tuples.size() && tuples[j].mu - tuples[i].mu <= tol_rel * tuples[i].mu) ++j;
        }
        SpectrumEntry e;
        e.lambda = exact ? unit * (static_cast<double>(tuples[i].scaled) / scale)
                         : unit * tuples[i].mu;
        e.multiplicity = static_cast<int>(j - i);
        for (std::size_t t = i; t < j; ++t) {
            e.index_set.push_back(tuples[t].n);
            ProductSineMode m;
            m.n = tuples[t].n;
            m.lengths = domain.lengths;
            e.modes.push_back(std::move(m));
        }
        if (exact) exact_values->scaled.push_back(tuples[i].scaled);
        entries.push_back(std::move(e));
        i = j;
    }
    return Spectrum(std::move(entries), std::move(exact_values));
}

// --- Liouville asymptotics ------------------------------------------------------

double LiouvilleAsymptotics::xi_at(double x) const {
    return interp_uniform(xi_val, xi_x.back(), x);
}

LiouvilleAsymptotics liouville_asymptotics(const Spectrum &spectrum, const Coefficient1D &coeff) {
    if (spectrum.size() < 20)
        throw InsufficientData("liouville_asymptotics: need at least 20 modes");
    for (std::size_t k = 1; k <= spectrum.size(); ++k)
        if (spectrum.entry(k).multiplicity != 1)
            throw InvalidArgument("liouville_asymptotics: spectrum is not one-dimensional");

    // domain length from the descriptors
    const EigenFunction &f0 = spectrum.entry(1).modes.front();
    double L = std::visit(
        [](const auto &m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ProductSineMode>)
                throw InvalidArgument("liouville_asymptotics: spectrum is not one-dimensional");
            else
                return m.length;
        },
        f0);

    LiouvilleAsymptotics out;
    // ell and xi by cumulative integration of a^{-1/2}; piecewise-constant
    // coefficients integrate exactly, everything else by fine trapezoid.
    const int ns = 4000;
    out.xi_x.resize(ns + 1);
    out.xi_val.resize(ns + 1);
    double acc = 0.0;
    out.xi_x[0] = 0.0;
    out.xi_val[0] = 0.0;
    double prev = 1.0 / std::sqrt(coeff.a_at(0.0));
    for (int i = 1; i <= ns; ++i) {
        const double x = L * i / ns;
        const double cur = 1.0 / std::sqrt(coeff.a_at(x));
        acc += 0.5 * (prev + cur) * (L / ns);
        out.xi_x[i] = x;
        out.xi_val[i] = acc;
        prev = cur;
    }
    out.ell = acc;
    for (auto &v : out.xi_val)
        v *= kPi / out.ell; // xi(L) = pi exactly
    out.C2 = std::sqrt(2.0 / out.ell);

    // least squares of lambda_k against k^2
    std::vector<double> ksq(spectrum.size()), lam(spectrum.size());
    for (std::size_t k = 1; k <= spectrum.size(); ++k) {
        ksq[k - 1] = static_cast<double>(k) * static_cast<double>(k);
        lam[k - 1] = spectrum.lambda(k);
    }
    const LineFit lf = fit_line(ksq, lam);
    out.fitted_leading = lf.slope;
    out.C1 = lf.intercept;
    out.residuals.resize(spectrum.size());
    for (std::size_t i = 0; i < spectrum.size(); ++i)
        out.residuals[i] = lam[i] - (lf.slope * ksq[i] + lf.intercept);

    const double cand_ell = out.ell * out.ell;
    const double cand_pi = (kPi / out.ell) * (kPi / out.ell);
    out.rel_err_ell_sq = std::abs(out.fitted_leading - cand_ell) / cand_ell;
    out.rel_err_pi_over_ell_sq = std::abs(out.fitted_leading - cand_pi) / cand_pi;
    const double tol = 0.05;
    if (out.rel_err_pi_over_ell_sq <= tol && out.rel_err_pi_over_ell_sq <= out.rel_err_ell_sq)
        out.match = LiouvilleAsymptotics::LeadingMatch::PiOverEllSquared;
    else if (out.rel_err_ell_sq <= tol)
        out.match = LiouvilleAsymptotics::LeadingMatch::EllSquared;
    else
        out.match = LiouvilleAsymptotics::LeadingMatch::Neither;
    return out;
}

} // namespace polystab::spectral
