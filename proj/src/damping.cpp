#include "polystab/damping.hpp"

#include "polystab/envelope.hpp"
#include "polystab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace polystab::damping {

namespace {

constexpr double kPi = std::numbers::pi;

using spectral::EigenFunction;
using spectral::GridMode;
using spectral::PiecewiseTrigMode;
using spectral::ProductSineMode;
using spectral::SineMode;

struct Interval {
    double a = 0.0, b = 0.0;
    bool empty() const { return !(b > a); }
};

Interval clip(double lo, double hi, double a, double b) {
    return {std::max(lo, a), std::min(hi, b)};
}

// One trigonometric piece amp*sin(w x + p) valid on a subinterval; every 1D
// descriptor family expands into one or two of these.
struct TrigPiece {
    double a, b;   // validity interval
    double amp, w, p;
};

std::vector<TrigPiece> trig_pieces(const EigenFunction &f) {
    if (const auto *s = std::get_if<SineMode>(&f)) {
        const double w = s->wavenumber();
        return {{0.0, s->length, std::sqrt(2.0 / s->length), w, 0.0}};
    }
    if (const auto *p = std::get_if<PiecewiseTrigMode>(&f)) {
        // right piece amp*sin(wr (L - x)) = amp*sin(-wr x + wr L)
        return {{0.0, p->breakpoint, p->amp_left, p->wav_left, 0.0},
                {p->breakpoint, p->length, p->amp_right, -p->wav_right, p->wav_right * p->length}};
    }
    throw InvalidArgument("damping: descriptor has no closed trigonometric form");
}

bool is_grid(const EigenFunction &f) { return std::holds_alternative<GridMode>(f); }
bool is_product(const EigenFunction &f) { return std::holds_alternative<ProductSineMode>(f); }

// int_a^b phi_i phi_j dx over the closed-form pieces
double mass_1d_closed(const EigenFunction &fi, const EigenFunction &fj, double a, double b) {
    double total = 0.0;
    for (const TrigPiece &pi : trig_pieces(fi))
        for (const TrigPiece &pj : trig_pieces(fj)) {
            const Interval iv = clip(std::max(pi.a, pj.a), std::min(pi.b, pj.b), a, b);
            if (iv.empty()) continue;
            total += pi.amp * pj.amp * trig_sin_sin(pi.w, pi.p, pj.w, pj.p, iv.a, iv.b);
        }
    return total;
}

// int_a^b phi_i' phi_j' dx over the closed-form pieces
double stiffness_1d_closed(const EigenFunction &fi, const EigenFunction &fj, double a, double b) {
    double total = 0.0;
    for (const TrigPiece &pi : trig_pieces(fi))
        for (const TrigPiece &pj : trig_pieces(fj)) {
            const Interval iv = clip(std::max(pi.a, pj.a), std::min(pi.b, pj.b), a, b);
            if (iv.empty()) continue;
            total += pi.amp * pi.w * pj.amp * pj.w *
                     trig_cos_cos(pi.w, pi.p, pj.w, pj.p, iv.a, iv.b);
        }
    return total;
}

// Trapezoid on the native grid of GridMode descriptors, restricted to [a, b].
double grid_integral(const GridMode &gi, const GridMode &gj, bool derivative, double a, double b,
                     double lambda_scale, const QuadratureOptions &quad) {
    const std::size_t n = gi.phi.size();
    if (gj.phi.size() != n)
        throw InvalidArgument("damping: grid descriptors have mismatched grids");
    const double L = gi.length;
    const double h = L / static_cast<double>(n - 1);
    // panels per oscillation at the dominant wavenumber sqrt(lambda)
    const double wavelength = 2.0 * kPi / std::sqrt(std::max(lambda_scale, 1e-300));
    if (wavelength / h < 4.0)
        throw AccuracyRefused("damping: grid resolution below 4 panels per oscillation");
    (void)quad;
    auto vi = [&](std::size_t i) { return derivative ? gi.dphi[i] : gi.phi[i]; };
    auto vj = [&](std::size_t i) { return derivative ? gj.dphi[i] : gj.phi[i]; };
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double x0 = i * h, x1 = (i + 1) * h;
        const Interval iv = clip(x0, x1, a, b);
        if (iv.empty()) continue;
        // linear interpolation of the product's factors at the clipped ends
        auto at = [&](double x) {
            const double t = (x - x0) / h;
            const double pi_ = vi(i) * (1.0 - t) + vi(i + 1) * t;
            const double pj_ = vj(i) * (1.0 - t) + vj(i + 1) * t;
            return pi_ * pj_;
        };
        total += 0.5 * (at(iv.a) + at(iv.b)) * (iv.b - iv.a);
    }
    return total;
}

// Separable closed forms for tensor sine modes over a box.
double mass_factor(const ProductSineMode &mi, const ProductSineMode &mj, std::size_t d, double a,
                   double b) {
    const double ni = std::sqrt(2.0 / mi.lengths[d]);
    const double nj = std::sqrt(2.0 / mj.lengths[d]);
    return ni * nj * trig_sin_sin(mi.wavenumber(d), 0.0, mj.wavenumber(d), 0.0, a, b);
}

double stiff_factor(const ProductSineMode &mi, const ProductSineMode &mj, std::size_t d, double a,
                    double b) {
    const double ni = std::sqrt(2.0 / mi.lengths[d]);
    const double nj = std::sqrt(2.0 / mj.lengths[d]);
    const double wi = mi.wavenumber(d), wj = mj.wavenumber(d);
    return ni * nj * wi * wj * trig_cos_cos(wi, 0.0, wj, 0.0, a, b);
}

Box full_box(std::span<const double> lengths) {
    Box b;
    b.lo.assign(lengths.size(), 0.0);
    b.hi.assign(lengths.begin(), lengths.end());
    return b;
}

Box clip_box(const Box &box, std::span<const double> lengths) {
    Box r = box;
    for (std::size_t d = 0; d < r.dim(); ++d) {
        r.lo[d] = std::max(r.lo[d], 0.0);
        r.hi[d] = std::min(r.hi[d], lengths[d]);
    }
    return r;
}

std::vector<double> domain_lengths_of(const spectral::Spectrum &spectrum) {
    const EigenFunction &f = spectrum.entry(1).modes.front();
    if (const auto *p = std::get_if<ProductSineMode>(&f)) return p->lengths;
    if (const auto *s = std::get_if<SineMode>(&f)) return {s->length};
    if (const auto *pw = std::get_if<PiecewiseTrigMode>(&f)) return {pw->length};
    if (const auto *g = std::get_if<GridMode>(&f)) return {g->length};
    throw InvalidArgument("damping: unknown descriptor family");
}

// <B phi_i, phi_j> for a single mode pair.
double form_entry(const EigenFunction &fi, const EigenFunction &fj, double lambda_scale,
                  const DampingConfig &cfg, std::span<const double> lengths,
                  const QuadratureOptions &quad) {
    double entry = 0.0;
    const bool nd = is_product(fi);
    if (nd != is_product(fj))
        throw InvalidArgument("damping: mixed descriptor dimensionalities");

    if (nd) {
        const auto &mi = std::get<ProductSineMode>(fi);
        const auto &mj = std::get<ProductSineMode>(fj);
        const std::size_t N = mi.n.size();
        for (const DampingRegion &r : cfg.b1_regions) {
            if (r.floor_value == 0.0) continue;
            const Box box = clip_box(r.box, lengths);
            double prod = r.floor_value;
            for (std::size_t d = 0; d < N && prod != 0.0; ++d)
                prod *= mass_factor(mi, mj, d, box.lo[d], box.hi[d]);
            entry += prod;
        }
        for (const DampingRegion &r : cfg.b2_regions) {
            if (r.floor_value == 0.0) continue;
            const Box box = clip_box(r.box, lengths);
            for (std::size_t d = 0; d < N; ++d) {
                double prod = r.floor_value;
                for (std::size_t e = 0; e < N; ++e)
                    prod *= (e == d) ? stiff_factor(mi, mj, e, box.lo[e], box.hi[e])
                                     : mass_factor(mi, mj, e, box.lo[e], box.hi[e]);
                entry += prod;
            }
        }
        if (cfg.b1_sampler || cfg.b2_sampler)
            throw Unsupported("damping: coefficient samplers are supported in 1D only");
        return entry;
    }

    const bool grid = is_grid(fi) || is_grid(fj);
    const double L = lengths[0];
    auto mass = [&](double a, double b) {
        if (grid)
            return grid_integral(std::get<GridMode>(fi), std::get<GridMode>(fj), false, a, b,
                                 lambda_scale, quad);
        return mass_1d_closed(fi, fj, a, b);
    };
    auto stiff = [&](double a, double b) {
        if (grid)
            return grid_integral(std::get<GridMode>(fi), std::get<GridMode>(fj), true, a, b,
                                 lambda_scale, quad);
        return stiffness_1d_closed(fi, fj, a, b);
    };
    for (const DampingRegion &r : cfg.b1_regions) {
        if (r.floor_value == 0.0) continue;
        const Box box = clip_box(r.box, lengths);
        entry += r.floor_value * mass(box.lo[0], box.hi[0]);
    }
    for (const DampingRegion &r : cfg.b2_regions) {
        if (r.floor_value == 0.0) continue;
        const Box box = clip_box(r.box, lengths);
        entry += r.floor_value * stiff(box.lo[0], box.hi[0]);
    }

    if (cfg.b1_sampler || cfg.b2_sampler) {
        if (quad.panels_per_oscillation < 4)
            throw AccuracyRefused("damping: quadrature below 4 panels per oscillation");
        const double w = std::sqrt(std::max(lambda_scale, 1.0));
        const double cycles = w * L / (2.0 * kPi) + 1.0;
        const int panels = std::max(64, static_cast<int>(quad.panels_per_oscillation * cycles));
        if (cfg.b1_sampler) {
            auto f = [&](double x) {
                return cfg.b1_sampler(x) * spectral::value_1d(fi, x) * spectral::value_1d(fj, x);
            };
            entry += simpson(f, 0.0, L, panels);
        }
        if (cfg.b2_sampler) {
            auto f = [&](double x) {
                return cfg.b2_sampler(x) * spectral::derivative_1d(fi, x) *
                       spectral::derivative_1d(fj, x);
            };
            entry += simpson(f, 0.0, L, panels);
        }
    }
    return entry;
}

Eigen::MatrixXd assemble_block(const spectral::Spectrum &spectrum, const DampingConfig &cfg,
                               std::span<const EigenFunction> modes, double lambda,
                               std::span<const double> lengths, const QuadratureOptions &quad) {
    const std::size_t m = modes.size();
    Eigen::MatrixXd b(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
            const double v = form_entry(modes[i], modes[j], lambda, cfg, lengths, quad);
            b(i, j) = v;
            b(j, i) = v;
        }
    (void)spectrum;
    return b;
}

double block_min_eig(const Eigen::MatrixXd &b) {
    if (b.rows() == 1) return b(0, 0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError("damping: symmetric eigensolver failed on a Gram block");
    return es.eigenvalues()(0);
}

} // namespace

void DampingConfig::validate(std::span<const double> domain_lengths) const {
    bool has_positive = static_cast<bool>(b1_sampler) || static_cast<bool>(b2_sampler);
    auto check = [&](const std::vector<DampingRegion> &regions, const char *name) {
        for (const DampingRegion &r : regions) {
            if (r.floor_value < 0.0)
                throw InvalidArgument(std::string("DampingConfig: negative floor in ") + name);
            if (r.floor_value > 0.0) has_positive = true;
            if (r.box.dim() != domain_lengths.size())
                throw InvalidArgument(std::string("DampingConfig: region dimension mismatch in ") +
                                      name);
            for (std::size_t d = 0; d < r.box.dim(); ++d)
                if (r.box.lo[d] < -1e-12 || r.box.hi[d] > domain_lengths[d] * (1.0 + 1e-12))
                    throw InvalidArgument(std::string("DampingConfig: region outside domain in ") +
                                          name);
        }
    };
    check(b1_regions, "b1");
    check(b2_regions, "b2");
    if (!has_positive)
        throw InvalidArgument("DampingConfig: no strictly positive damping floor");
}

Eigen::MatrixXd GramMatrix::block(std::size_t k) const {
    if (k < k_lo || k > k_hi)
        throw InvalidArgument("GramMatrix::block: eigenspace outside assembled range");
    const std::size_t i = k - k_lo;
    return g.block(block_offset[i], block_offset[i], block_size[i], block_size[i]);
}

GramMatrix assemble_gram(const spectral::Spectrum &spectrum, const DampingConfig &damping,
                         std::size_t k_lo, std::size_t k_hi, const QuadratureOptions &quad) {
    if (k_lo < 1 || k_hi > spectrum.size() || k_lo > k_hi)
        throw InvalidArgument("assemble_gram: bad eigenspace range");
    const std::vector<double> lengths = domain_lengths_of(spectrum);
    damping.validate(lengths);

    GramMatrix gm;
    gm.k_lo = k_lo;
    gm.k_hi = k_hi;
    std::vector<const EigenFunction *> modes;
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
        const auto &e = spectrum.entry(k);
        gm.block_offset.push_back(static_cast<int>(modes.size()));
        gm.block_size.push_back(e.multiplicity);
        for (const auto &m : e.modes) {
            modes.push_back(&m);
            gm.lambda_flat.push_back(e.lambda);
        }
    }
    const std::size_t M = modes.size();
    gm.g.resize(M, M);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = i; j < M; ++j) {
            const double scale = std::max(gm.lambda_flat[i], gm.lambda_flat[j]);
            const double v = form_entry(*modes[i], *modes[j], scale, damping, lengths, quad);
            gm.g(i, j) = v;
            gm.g(j, i) = v;
        }
    return gm;
}

double compute_beta(const spectral::Spectrum &spectrum, const GramMatrix &gram, std::size_t k) {
    const Eigen::MatrixXd b = gram.block(k);
    const double min_eig = block_min_eig(b);
    const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
    if (min_eig <= 1e-12 * scale)
        throw DegenerateDamping("compute_beta: eigenspace block is not positive definite; "
                                "the nondegeneracy constant fails for k=" +
                                std::to_string(k));
    (void)spectrum;
    return 1.0 / min_eig;
}

NormBEstimate estimate_norm_B(const spectral::Spectrum &spectrum, const GramMatrix &gram) {
    const std::size_t n_spaces = gram.k_hi - gram.k_lo + 1;
    if (n_spaces < 10)
        throw InsufficientData("estimate_norm_B: need a Gram over at least 10 eigenspaces");
    Eigen::VectorXd dinv(gram.modes());
    for (std::size_t i = 0; i < gram.modes(); ++i)
        dinv(i) = 1.0 / std::sqrt(gram.lambda_flat[i]);
    Eigen::MatrixXd scaled = dinv.asDiagonal() * gram.g * dinv.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scaled, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError("estimate_norm_B: symmetric eigensolver failed");
    (void)spectrum;
    return {es.eigenvalues().maxCoeff(), n_spaces};
}

std::vector<BetaPoint> beta_points(const spectral::Spectrum &spectrum, const DampingConfig &damping,
                                   std::size_t k_lo, std::size_t k_hi,
                                   const QuadratureOptions &quad) {
    if (k_lo < 1 || k_hi > spectrum.size() || k_lo > k_hi)
        throw InvalidArgument("beta_points: bad eigenspace range");
    const std::vector<double> lengths = domain_lengths_of(spectrum);
    damping.validate(lengths);
    // grouping is tolerance-based exactly when no exact lattice representation
    // is attached
    const bool floating_grouped =
        !spectrum.exact() && !spectrum.entries().front().index_set.empty();
    const double group_tol = 1e-9;

    std::vector<BetaPoint> out;
    out.reserve(k_hi - k_lo + 1);
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
        const auto &e = spectrum.entry(k);
        std::vector<EigenFunction> modes(e.modes.begin(), e.modes.end());
        Eigen::MatrixXd blk = assemble_block(spectrum, damping, modes, e.lambda, lengths, quad);
        double min_eig = block_min_eig(blk);

        if (floating_grouped) {
            // worst case over +-1 grouping perturbations of near-degenerate
            // neighbours; widening a block can only lower its least eigenvalue
            auto widened = [&](std::size_t kn) {
                const auto &en = spectrum.entry(kn);
                if (std::abs(en.lambda - e.lambda) > 10.0 * group_tol * e.lambda) return;
                std::vector<EigenFunction> wider = modes;
                wider.insert(wider.end(), en.modes.begin(), en.modes.end());
                Eigen::MatrixXd wb =
                    assemble_block(spectrum, damping, wider, e.lambda, lengths, quad);
                min_eig = std::min(min_eig, block_min_eig(wb));
            };
            if (k > 1) widened(k - 1);
            if (k < spectrum.size()) widened(k + 1);
        }

        const double scale = std::max(blk.cwiseAbs().maxCoeff(), 1e-300);
        if (min_eig <= 1e-12 * scale)
            throw DegenerateDamping("beta_points: eigenspace block is not positive definite at k=" +
                                    std::to_string(k));
        out.push_back({k, e.lambda, e.multiplicity, 1.0 / min_eig});
    }
    return out;
}

BetaReport fit_gamma0(std::vector<BetaPoint> points) {
    if (points.size() < 20)
        throw InsufficientData("fit_gamma0: need at least 20 data points");
    std::vector<double> lx(points.size()), ly(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        lx[i] = std::log(points[i].lambda);
        ly[i] = std::log(points[i].beta);
    }
    const EnvelopeFit fit = fit_upper_envelope(lx, ly);
    BetaReport rep;
    rep.points = std::move(points);
    rep.gamma0 = fit.slope;
    rep.c0 = std::exp(fit.intercept);
    return rep;
}

void BetaReport::write_report(std::ostream &os) const {
    os << "k\tlambda\tm_k\tbeta\tbound\n";
    char buf[160];
    for (const BetaPoint &p : points) {
        const double bound = c0 * std::pow(p.lambda, gamma0);
        std::snprintf(buf, sizeof buf, "%zu\t%.12g\t%d\t%.12g\t%.12g\n", p.k, p.lambda,
                      p.multiplicity, p.beta, bound);
        os << buf;
    }
}

} // namespace polystab::damping
