#pragma once

// Point spectra, eigenfunctions, resolvent kernels and the Robin continuum
// for every extension in the catalog.

#include "kgspec/extensions.hpp"
#include "kgspec/geometry.hpp"
#include "kgspec/numerics.hpp"
#include "kgspec/scalars.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace kgspec::spectral {

using extensions::BoundaryTrace;
using extensions::CircleClosure;
using extensions::DirectSum;
using extensions::ExtensionSpec;
using extensions::HalfLineRobin;
using extensions::IntervalDirichlet;
using extensions::IntervalFirstKind;
using extensions::IntervalSecondKind;
using extensions::MassShift;
using extensions::Operator;
using geometry::ManifoldKind;
using geometry::Point;

/// Evaluation of the resolvent at (or numerically on top of) a spectral point.
class PoleError : public Error {
public:
    PoleError(cplx lambda, double nearest)
        : Error("resolvent evaluated at lambda = (" + std::to_string(lambda.real()) + ", " +
                std::to_string(lambda.imag()) + "), nearest eigenvalue " + std::to_string(nearest)),
          nearest_(nearest) {}

    double nearest() const { return nearest_; }

private:
    double nearest_;
};

enum class ModeTag { trig, hyperbolic, affine, exponential_decay, fourier };

inline std::string to_string(ModeTag t) {
    switch (t) {
        case ModeTag::trig: return "trig";
        case ModeTag::hyperbolic: return "hyperbolic";
        case ModeTag::affine: return "affine";
        case ModeTag::exponential_decay: return "exponential_decay";
        case ModeTag::fourier: return "fourier";
    }
    return "unknown";
}

/// Closed-form eigenfunction on [0, length]:
///   trig, fourier      A cos(kx) + B sin(kx)
///   hyperbolic         A e^{-kx} + B e^{-k(length - x)}
///   affine             A + B x
///   exponential_decay  A e^{-kx}            (half-line, length = inf)
struct ModeFunction {
    ModeTag tag = ModeTag::trig;
    double lambda = 0.0;  // eigenvalue of the operator, mass shift included
    double k = 0.0;
    double length = 1.0;
    cplx A = 0.0;
    cplx B = 0.0;
    int component = 0;

    cplx value(double x) const {
        switch (tag) {
            case ModeTag::trig:
            case ModeTag::fourier: return A * std::cos(k * x) + B * std::sin(k * x);
            case ModeTag::hyperbolic: return A * std::exp(-k * x) + B * std::exp(-k * (length - x));
            case ModeTag::affine: return A + B * x;
            case ModeTag::exponential_decay: return A * std::exp(-k * x);
        }
        return 0.0;
    }

    cplx derivative(double x) const {
        switch (tag) {
            case ModeTag::trig:
            case ModeTag::fourier: return k * (B * std::cos(k * x) - A * std::sin(k * x));
            case ModeTag::hyperbolic: return k * (B * std::exp(-k * (length - x)) - A * std::exp(-k * x));
            case ModeTag::affine: return B;
            case ModeTag::exponential_decay: return -k * A * std::exp(-k * x);
        }
        return 0.0;
    }

    BoundaryTrace trace() const {
        BoundaryTrace t;
        t.value0 = value(0.0);
        t.inward0 = derivative(0.0);
        if (std::isfinite(length)) {
            t.value_a = value(length);
            t.inward_a = -derivative(length);
        }
        return t;
    }
};

struct Eigenvalue {
    double lambda = 0.0;
    int multiplicity = 1;
    int component = 0;
    bool flagged = false;  // near-degenerate pair resolved at rounding level
};

/// Robin continuum on one half-line: generalized eigenfunctions psi_k with
/// eigenvalue k^2 + mu, normalized so that int psi_k psi_k' = delta(k - k').
struct ContinuumDescriptor {
    int component = 0;
    double alpha = 0.0;
    double mu = 0.0;

    double psi(double k, double x) const {
        const double ca = std::cos(alpha);
        const double sa = std::sin(alpha);
        const double n = std::sqrt(k * k * sa * sa + ca * ca);
        return std::sqrt(2.0 / pi) * (k * sa * std::cos(k * x) + ca * std::sin(k * x)) / n;
    }
    double lambda(double k) const { return k * k + mu; }
    /// Spectral density in lambda on the diagonal block (x, y).
    double density(double x, double y, double lam) const {
        const double k = std::sqrt(lam - mu);
        return psi(k, x) * psi(k, y) / (2.0 * k);
    }
};

struct SpectralData {
    geometry::ManifoldSpec manifold;
    std::vector<Eigenvalue> eigenvalues;  // ascending (ties ordered by component)
    std::vector<ModeFunction> modes;      // ascending lambda, orthonormal per component
    std::vector<ContinuumDescriptor> continua;
    double lambda_searched = 0.0;  // upper end of the point-spectrum search

    std::size_t size() const { return modes.size(); }
    bool has_continuum() const { return !continua.empty(); }
};

struct SearchOptions {
    double lambda_min = -infinity;
    double lambda_max = infinity;
    std::size_t max_count = std::numeric_limits<std::size_t>::max();  // distinct eigenvalues
    double kappa_max = 0.0;  // ceiling for sqrt(-lambda); 0 picks a default from the parameters
};

namespace detail {

struct Mat2 {
    cplx m11, m12, m21, m22;

    cplx det() const { return m11 * m22 - m12 * m21; }
    double max_abs() const { return std::max({std::abs(m11), std::abs(m12), std::abs(m21), std::abs(m22)}); }
    double part(int j) const {
        const cplx v = j / 2 == 0 ? m11 : j / 2 == 1 ? m12 : j / 2 == 2 ? m21 : m22;
        return j % 2 == 0 ? v.real() : v.imag();
    }
};

inline Mat2 residual_matrix(const ExtensionSpec& e, const BoundaryTrace& b1, const BoundaryTrace& b2) {
    const auto r1 = extensions::boundary_residual(e, b1);
    const auto r2 = extensions::boundary_residual(e, b2);
    return {r1.at(0), r2.at(0), r1.at(1), r2.at(1)};
}

/// Traces of C(x, lambda) and S(x, lambda).
inline std::array<BoundaryTrace, 2> entire_traces(double lambda, double a) {
    const double C = scalars::cos_entire(a, lambda).real();
    const double S = scalars::sin_entire(a, lambda).real();
    return {BoundaryTrace{1.0, C, 0.0, lambda * S}, BoundaryTrace{0.0, S, 1.0, -C}};
}

/// Traces of e^{-kx} and e^{-k(a-x)}.
inline std::array<BoundaryTrace, 2> exp_traces(double k, double a) {
    const double E = std::exp(-k * a);
    return {BoundaryTrace{1.0, E, -k, k * E}, BoundaryTrace{E, 1.0, k * E, -k}};
}

/// Traces of the natural mode basis at lambda.
inline std::array<BoundaryTrace, 2> mode_traces(ModeTag tag, double k, double a) {
    switch (tag) {
        case ModeTag::trig:
            return {BoundaryTrace{1.0, std::cos(k * a), 0.0, k * std::sin(k * a)},
                    BoundaryTrace{0.0, std::sin(k * a), k, -k * std::cos(k * a)}};
        case ModeTag::hyperbolic: return exp_traces(k, a);
        default: return {BoundaryTrace{1.0, 1.0, 0.0, 0.0}, BoundaryTrace{0.0, a, 1.0, -1.0}};
    }
}

/// Gram matrix (g11, g12, g22) of the natural basis on [0, a].
inline std::array<double, 3> basis_gram(ModeTag tag, double k, double a) {
    switch (tag) {
        case ModeTag::trig:
        case ModeTag::fourier:
            if (k == 0.0) return {a, 0.0, 0.0};
            return {a / 2 + std::sin(2 * k * a) / (4 * k), std::pow(std::sin(k * a), 2) / (2 * k),
                    a / 2 - std::sin(2 * k * a) / (4 * k)};
        case ModeTag::hyperbolic: {
            const double d = -std::expm1(-2 * k * a) / (2 * k);
            return {d, a * std::exp(-k * a), d};
        }
        case ModeTag::affine: return {a, a * a / 2, a * a * a / 3};
        case ModeTag::exponential_decay: return {1.0 / (2 * k), 0.0, 0.0};
    }
    return {0.0, 0.0, 0.0};
}

inline cplx gram_inner(const std::array<double, 3>& g, cplx A1, cplx B1, cplx A2, cplx B2) {
    return A1 * std::conj(A2) * g[0] + B1 * std::conj(B2) * g[2] + (A1 * std::conj(B2) + B1 * std::conj(A2)) * g[1];
}

struct Root {
    double u = 0.0;
    int multiplicity = 1;
    bool flagged = false;
};

template <class F>
double bisect(F&& f, double lo, double hi, double flo) {
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Scans [u_begin, u_end] in cells of width `step` for zeros of the real
/// function f. Cells without a sign change but with an interior extremum are
/// split at the extremum; a touching extremum is accepted as a double root
/// only when every entry of the boundary matrix vanishes there.
template <class F, class M>
std::vector<Root> scan_roots(F&& f, M&& mat, double u_begin, double u_end, double step, std::size_t max_modes) {
    std::vector<Root> roots;
    std::size_t modes = 0;
    const double delta = 1e-6 * step;
    auto df = [&](double u) { return (f(u + delta) - f(std::max(u - delta, u_begin))) / (u + delta - std::max(u - delta, u_begin)); };

    auto push = [&](Root r) {
        roots.push_back(r);
        modes += static_cast<std::size_t>(r.multiplicity);
    };

    auto try_double = [&](double lo, double hi, double e, double fscale, double fe) {
        const Mat2 ml = mat(lo);
        const Mat2 mh = mat(hi);
        int best = -1;
        double best_span = 0.0;
        for (int j = 0; j < 8; ++j) {
            const double pl = ml.part(j);
            const double ph = mh.part(j);
            if ((pl < 0.0) != (ph < 0.0) && pl != 0.0 && ph != 0.0 && std::abs(pl - ph) > best_span) {
                best = j;
                best_span = std::abs(pl - ph);
            }
        }
        if (best >= 0) {
            auto g = [&](double u) { return mat(u).part(best); };
            const double u = bisect(g, lo, hi, ml.part(best));
            const double entry_scale = std::max(ml.max_abs(), mh.max_abs());
            if (mat(u).max_abs() <= 1e-8 * entry_scale && std::abs(u - e) <= 1e-3 * step) {
                push(Root{u, 2, false});
                return;
            }
        }
        if (std::abs(fe) <= 1e-13 * fscale)
            throw ConvergenceError("unresolved near-degenerate eigenvalue pair", lo, hi);
    };

    // offset keeps grid nodes away from roots at rational multiples of the step
    constexpr double offset = 0.3819660112501051;
    double lo = u_begin;
    double flo = f(lo);
    double dlo = df(lo);
    double hi = std::min(u_begin + offset * step, u_end);
    while (lo < u_end && modes < max_modes) {
        const double fhi = f(hi);
        const double dhi = df(hi);
        if (flo == 0.0) {
            // exact zero at a node; attribute to this node once
            const bool full = mat(lo).max_abs() == 0.0;
            push(Root{lo, full ? 2 : 1, false});
        } else if (fhi != 0.0 && (flo < 0.0) != (fhi < 0.0)) {
            push(Root{bisect(f, lo, hi, flo), 1, false});
        } else if (fhi != 0.0 && (dlo < 0.0) != (dhi < 0.0) && dlo != 0.0 && dhi != 0.0) {
            double a = lo, b = hi, da = dlo;
            for (int it = 0; it < 60 && b - a > 1e-12 * step; ++it) {
                const double m = 0.5 * (a + b);
                const double dm = df(m);
                if ((dm < 0.0) == (da < 0.0)) {
                    a = m;
                    da = dm;
                } else {
                    b = m;
                }
            }
            const double e = 0.5 * (a + b);
            const double fe = f(e);
            const double fscale = std::max(std::abs(flo), std::abs(fhi));
            if (fe != 0.0 && (fe < 0.0) != (flo < 0.0)) {
                push(Root{bisect(f, lo, e, flo), 1, false});
                if (modes < max_modes) push(Root{bisect(f, e, hi, fe), 1, false});
            } else if (std::abs(fe) <= 1e-6 * fscale) {
                try_double(lo, hi, e, fscale, fe);
            }
        }
        if (hi >= u_end) break;
        lo = hi;
        flo = fhi;
        dlo = dhi;
        hi = std::min(hi + step, u_end);
    }
    return roots;
}

inline double theta_norm(const ExtensionSpec& e) {
    if (e.holds<IntervalFirstKind>()) {
        const auto& f = e.as<IntervalFirstKind>();
        return std::abs(f.theta11) + std::abs(f.theta22) + 2 * std::abs(f.theta12);
    }
    if (e.holds<IntervalSecondKind>()) return std::abs(e.as<IntervalSecondKind>().theta);
    return 0.0;
}

inline double default_kappa_max(const ExtensionSpec& e, double a) {
    return std::max(50.0 / a, 4.0 * theta_norm(e) + 8.0 / a);
}

inline double zero_criterion_scale(const ExtensionSpec& e, double a) {
    if (e.holds<IntervalFirstKind>()) {
        const auto& f = e.as<IntervalFirstKind>();
        return a * std::norm(f.theta12) + std::abs(f.theta11) + a * std::abs(f.theta11 * f.theta22) +
               std::abs(f.theta22) + 2 * std::abs(f.theta12.real());
    }
    if (e.holds<IntervalSecondKind>()) {
        const auto& k = e.as<IntervalSecondKind>();
        return a * std::abs(k.theta) + 2 * std::abs(k.w1 * std::conj(k.w2)) + 1.0;
    }
    return a;
}

}  // namespace detail

/// Real function of lambda vanishing exactly on the point spectrum. Interval
/// kinds use the closed trigonometric forms for lambda > 0, their entire
/// continuation times sqrt(-lambda) for lambda < 0, and the algebraic zero
/// criteria at lambda = 0.
inline double eigenvalue_condition(const Operator& op, double lambda) {
    double mu = 0.0;
    const ExtensionSpec& e = extensions::unshifted(op.extension, mu);
    const double lam = lambda - mu;
    const double a = op.manifold.length;
    if (e.holds<DirectSum>()) {
        double p = 1.0;
        for (int c = 0; c < op.components(); ++c) p *= eigenvalue_condition(op.component(c), lambda);
        return p;
    }
    if (e.holds<CircleClosure>()) {
        if (lam == 0.0) return 0.0;
        if (lam > 0.0) return 1.0 - std::cos(std::sqrt(lam) * a);
        return 1.0 - std::cosh(std::sqrt(-lam) * a);
    }
    if (e.holds<HalfLineRobin>()) {
        const double al = e.as<HalfLineRobin>().alpha;
        if (lam >= 0.0) return 1.0;
        return std::cos(al) + std::sqrt(-lam) * std::sin(al);
    }
    if (e.holds<IntervalDirichlet>()) return scalars::sin_entire(a, lam).real();
    if (e.holds<IntervalFirstKind>()) {
        const auto& f = e.as<IntervalFirstKind>();
        const double t12sq = std::norm(f.theta12);
        const double re12 = f.theta12.real();
        if (lam == 0.0) return a * t12sq - f.theta11 - a * f.theta11 * f.theta22 - f.theta22 - 2 * re12;
        if (lam > 0.0) {
            const double s = std::sqrt(lam);
            const double c = std::cos(s * a);
            const double sn = std::sin(s * a);
            return f.theta11 * s * c + f.theta22 * s * c - lam * sn + f.theta11 * f.theta22 * sn - t12sq * sn +
                   2 * re12 * s;
        }
        const double k = std::sqrt(-lam);
        const double C = std::cosh(k * a);
        const double S = std::sinh(k * a) / k;
        return k * ((f.theta11 + f.theta22) * C + (f.theta11 * f.theta22 - t12sq) * S - lam * S + 2 * re12);
    }
    const auto& w = e.as<IntervalSecondKind>();
    const double re = (w.w1 * std::conj(w.w2)).real();
    if (lam == 0.0) return a * w.theta - 2 * re + 1.0;
    if (lam > 0.0) {
        const double s = std::sqrt(lam);
        return -s * std::cos(s * a) + 2 * re * s - w.theta * std::sin(s * a);
    }
    const double k = std::sqrt(-lam);
    return -k * (std::cosh(k * a) + w.theta * std::sinh(k * a) / k - 2 * re);
}

namespace detail {

inline bool zero_is_eigenvalue(const Operator& op) {
    double mu = 0.0;
    const ExtensionSpec& e = extensions::unshifted(op.extension, mu);
    const double crit = eigenvalue_condition(op, mu);
    return std::abs(crit) <= 1e-12 * zero_criterion_scale(e, op.manifold.length);
}

inline int nullity(const Mat2& m, double scale) { return m.max_abs() <= 1e-8 * scale ? 2 : 1; }

inline double matrix_scale(const ExtensionSpec& e, double k) { return (1.0 + theta_norm(e)) * (1.0 + k); }

// Eigenvalues of an interval extension (no shift) in [lmin, lmax].
inline std::vector<Eigenvalue> interval_eigenvalues(const ExtensionSpec& e, double a, const SearchOptions& o) {
    std::vector<Eigenvalue> out;
    const bool zero = [&] {
        Operator op(geometry::ManifoldSpec::interval(a), e);
        return zero_is_eigenvalue(op);
    }();

    // negative part: at most two eigenvalues counted with multiplicity
    if (o.lambda_min < 0.0) {
        double kmax = o.kappa_max > 0.0 ? o.kappa_max : default_kappa_max(e, a);
        const double klim = std::isfinite(o.lambda_min) ? std::sqrt(-o.lambda_min) : infinity;
        kmax = std::min(kmax, klim);
        auto mat = [&](double k) {
            const auto tr = exp_traces(k, a);
            return residual_matrix(e, tr[0], tr[1]);
        };
        auto f = [&](double k) { return mat(k).det().real() / (2 * k); };
        const double step = 0.05;
        const double start = zero ? 1e-3 * step : 1e-9 * step;
        if (kmax > start) {
            // scan past the cut so a root sitting on it is bracketed
            auto roots = scan_roots(f, mat, start, kmax + step, step, 2);
            for (auto it = roots.rbegin(); it != roots.rend(); ++it)
                if (it->u <= kmax) out.push_back(Eigenvalue{-it->u * it->u, it->multiplicity, 0, it->flagged});
        }
    }
    if (zero && o.lambda_min <= 0.0 && 0.0 <= o.lambda_max) {
        const auto tr = mode_traces(ModeTag::affine, 0.0, a);
        out.push_back(Eigenvalue{0.0, nullity(residual_matrix(e, tr[0], tr[1]), matrix_scale(e, 0.0)), 0, false});
    }
    if (o.lambda_max > 0.0) {
        std::size_t have = out.size();
        if (have >= o.max_count) return out;
        const double smax = std::isfinite(o.lambda_max) ? std::sqrt(o.lambda_max) : infinity;
        auto mat = [&](double s) {
            const auto tr = entire_traces(s * s, a);
            return residual_matrix(e, tr[0], tr[1]);
        };
        auto f = [&](double s) { return mat(s).det().real(); };
        const double step = pi / (8 * a);
        const double start = zero ? 1e-3 * step : 0.0;
        std::vector<Root> roots;
        if (std::isfinite(smax)) {
            if (smax > start) {
                roots = scan_roots(f, mat, start, smax + step, step, std::numeric_limits<std::size_t>::max());
                std::erase_if(roots, [&](const Root& r) { return r.u > smax; });
            }
        } else {
            // windows of about two eigenvalue spacings per missing eigenvalue
            double lo = start;
            while (have + roots.size() < o.max_count) {
                const double hi = lo + 16 * step * static_cast<double>(o.max_count - have - roots.size() + 2);
                for (const auto& r : scan_roots(f, mat, lo, hi, step, std::numeric_limits<std::size_t>::max()))
                    if (roots.empty() || r.u > roots.back().u) roots.push_back(r);
                lo = hi;
            }
        }
        for (const auto& r : roots) {
            if (r.u <= 0.0) continue;
            out.push_back(Eigenvalue{r.u * r.u, r.multiplicity, 0, r.flagged});
            if (out.size() >= o.max_count) break;
        }
    }
    return out;
}

}  // namespace detail

/// Sorted point spectrum in [lambda_min, lambda_max], at most max_count
/// distinct eigenvalues per component (ascending).
inline std::vector<Eigenvalue> find_eigenvalues(const Operator& op, const SearchOptions& opts) {
    if (!(opts.lambda_min < opts.lambda_max)) throw InvalidArgument("find_eigenvalues needs lambda_min < lambda_max");
    if (!std::isfinite(opts.lambda_max) && opts.max_count == std::numeric_limits<std::size_t>::max())
        throw InvalidArgument("find_eigenvalues needs a finite lambda_max or max_count");
    double mu = 0.0;
    const ExtensionSpec& e = extensions::unshifted(op.extension, mu);
    SearchOptions inner = opts;
    inner.lambda_min -= mu;
    inner.lambda_max -= mu;
    std::vector<Eigenvalue> out;

    if (e.holds<DirectSum>()) {
        for (int c = 0; c < op.components(); ++c) {
            auto part = find_eigenvalues(op.component(c), opts);
            for (auto& ev : part) {
                ev.component = c;
                out.push_back(ev);
            }
        }
        std::stable_sort(out.begin(), out.end(), [](const Eigenvalue& x, const Eigenvalue& y) {
            return x.lambda < y.lambda || (x.lambda == y.lambda && x.component < y.component);
        });
        return out;
    }
    if (e.holds<CircleClosure>()) {
        const double L = op.manifold.length;
        for (std::size_t n = 0; out.size() < opts.max_count; ++n) {
            const double lam = std::pow(2 * pi * static_cast<double>(n) / L, 2);
            if (lam > inner.lambda_max) break;
            if (lam >= inner.lambda_min) out.push_back(Eigenvalue{lam, n == 0 ? 1 : 2, 0, false});
        }
    } else if (e.holds<HalfLineRobin>()) {
        const double al = e.as<HalfLineRobin>().alpha;
        auto g = [&](double k) { return std::cos(al) + k * std::sin(al); };
        double khi = std::isfinite(inner.lambda_min) ? std::sqrt(std::max(-inner.lambda_min, 0.0))
                                                     : 1.0 + 4.0 / std::max(std::abs(std::tan(al)), 1e-300);
        if (inner.lambda_min < 0.0 && g(khi) < 0.0 && opts.max_count > 0) {
            const double k = detail::bisect(g, 0.0, khi, g(0.0));
            if (-k * k <= inner.lambda_max) out.push_back(Eigenvalue{-k * k, 1, 0, false});
        }
    } else {
        out = detail::interval_eigenvalues(e, op.manifold.length, inner);
        std::vector<Eigenvalue> kept;
        for (const auto& ev : out)
            if (ev.lambda >= inner.lambda_min && ev.lambda <= inner.lambda_max) kept.push_back(ev);
        out = std::move(kept);
    }
    for (auto& ev : out) ev.lambda += mu;
    return out;
}

inline std::vector<Eigenvalue> find_eigenvalues(const Operator& op, double lambda_min, double lambda_max,
                                                std::size_t max_count = std::numeric_limits<std::size_t>::max()) {
    SearchOptions o;
    o.lambda_min = lambda_min;
    o.lambda_max = lambda_max;
    o.max_count = max_count;
    return find_eigenvalues(op, o);
}

namespace detail {

inline ModeFunction normalized(ModeFunction m) {
    const auto g = basis_gram(m.tag, m.k, m.length);
    const double n2 = gram_inner(g, m.A, m.B, m.A, m.B).real();
    if (!(n2 > 0.0)) throw Error("eigenfunction with vanishing norm");
    const double n = std::sqrt(n2);
    m.A /= n;
    m.B /= n;
    // fix the global phase: largest coefficient real positive
    const cplx lead = std::abs(m.A) >= std::abs(m.B) ? m.A : m.B;
    const cplx ph = std::conj(lead) / std::abs(lead);
    m.A *= ph;
    m.B *= ph;
    if (std::abs(m.A.imag()) <= 1e-15 * std::abs(m.A) && std::abs(m.B.imag()) <= 1e-15 * std::abs(m.B) + 1e-300) {
        m.A = m.A.real();
        m.B = m.B.real();
    }
    return m;
}

inline std::vector<ModeFunction> interval_modes(const ExtensionSpec& e, double a, double lam, double shifted) {
    ModeFunction base;
    base.length = a;
    base.lambda = shifted;
    if (lam > 0.0) {
        base.tag = ModeTag::trig;
        base.k = std::sqrt(lam);
    } else if (lam < 0.0) {
        base.tag = ModeTag::hyperbolic;
        base.k = std::sqrt(-lam);
    } else {
        base.tag = ModeTag::affine;
    }
    const auto tr = mode_traces(base.tag, base.k, a);
    const Mat2 M = residual_matrix(e, tr[0], tr[1]);
    const double scale = matrix_scale(e, base.k);
    const double big = M.max_abs();
    const double smallest = big > 0.0 ? std::abs(M.det()) / big : 0.0;
    if (smallest > 1e-6 * scale) throw InvalidArgument("lambda = " + std::to_string(shifted) + " is not an eigenvalue");
    if (big <= 1e-8 * scale) {
        // both basis functions satisfy the conditions: Gram-Schmidt
        const auto g = basis_gram(base.tag, base.k, a);
        ModeFunction m1 = base;
        m1.A = 1.0;
        m1 = normalized(m1);
        ModeFunction m2 = base;
        m2.B = 1.0;
        const cplx proj = gram_inner(g, m2.A, m2.B, m1.A, m1.B);
        m2.A -= proj * m1.A;
        m2.B -= proj * m1.B;
        return {m1, normalized(m2)};
    }
    const double n1 = std::abs(M.m11) + std::abs(M.m12);
    const double n2 = std::abs(M.m21) + std::abs(M.m22);
    ModeFunction m = base;
    if (n1 >= n2) {
        m.A = M.m12;
        m.B = -M.m11;
    } else {
        m.A = M.m22;
        m.B = -M.m21;
    }
    return {normalized(m)};
}

}  // namespace detail

/// Normalized eigenfunctions for lambda (two for a double eigenvalue).
inline std::vector<ModeFunction> eigenfunctions(const Operator& op, double lambda, int component = 0) {
    double mu = 0.0;
    const ExtensionSpec& e = extensions::unshifted(op.extension, mu);
    const double lam = lambda - mu;
    if (e.holds<DirectSum>()) {
        auto modes = eigenfunctions(op.component(component), lambda);
        for (auto& m : modes) m.component = component;
        return modes;
    }
    if (e.holds<CircleClosure>()) {
        const double L = op.manifold.length;
        const double n = std::round(std::sqrt(std::max(lam, 0.0)) * L / (2 * pi));
        if (std::abs(lam - std::pow(2 * pi * n / L, 2)) > 1e-10 * std::max(1.0, std::abs(lam)))
            throw InvalidArgument("lambda = " + std::to_string(lambda) + " is not an eigenvalue");
        ModeFunction m{ModeTag::fourier, lambda, 2 * pi * n / L, L, 0.0, 0.0, 0};
        if (n == 0) {
            m.A = 1.0 / std::sqrt(L);
            return {m};
        }
        ModeFunction s = m;
        m.A = std::sqrt(2.0 / L);
        s.B = std::sqrt(2.0 / L);
        return {m, s};
    }
    if (e.holds<HalfLineRobin>()) {
        const double al = e.as<HalfLineRobin>().alpha;
        if (!(lam < 0.0) || std::abs(std::cos(al) + std::sqrt(-lam) * std::sin(al)) > 1e-8 * (1.0 + std::sqrt(-lam)))
            throw InvalidArgument("lambda = " + std::to_string(lambda) + " is not an eigenvalue");
        const double k = std::sqrt(-lam);
        return {ModeFunction{ModeTag::exponential_decay, lambda, k, infinity, std::sqrt(2 * k), 0.0, 0}};
    }
    return detail::interval_modes(e, op.manifold.length, lam, lambda);
}

inline ModeFunction eigenfunction(const Operator& op, double lambda, int component = 0) {
    return eigenfunctions(op, lambda, component).front();
}

struct SpectrumOptions {
    std::size_t max_modes = 512;
    double lambda_max = infinity;
    double lambda_min = -infinity;
};

/// Point spectrum with orthonormal modes (up to max_modes per component)
/// plus the continuum descriptors of Robin half-lines.
inline SpectralData compute_spectrum(const Operator& op, const SpectrumOptions& opts = {}) {
    SpectralData sd;
    sd.manifold = op.manifold;
    double mu = 0.0;
    const ExtensionSpec& e = extensions::unshifted(op.extension, mu);
    for (int c = 0; c < op.components(); ++c) {
        const Operator comp = op.component(c);
        double cmu = 0.0;
        const ExtensionSpec& ce = extensions::unshifted(comp.extension, cmu);
        if (ce.holds<HalfLineRobin>()) sd.continua.push_back(ContinuumDescriptor{c, ce.as<HalfLineRobin>().alpha, cmu});
        SearchOptions so;
        so.lambda_min = opts.lambda_min;
        so.lambda_max = opts.lambda_max;
        so.max_count = opts.max_modes;
        if (!std::isfinite(so.lambda_max) && opts.max_modes == 0) continue;
        auto evs = find_eigenvalues(comp, so);
        std::size_t count = 0;
        for (auto ev : evs) {
            if (count >= opts.max_modes) break;
            ev.component = c;
            auto modes = eigenfunctions(comp, ev.lambda);
            ev.multiplicity = static_cast<int>(modes.size());
            for (auto& m : modes) {
                m.component = c;
                sd.modes.push_back(m);
            }
            count += modes.size();
            sd.eigenvalues.push_back(ev);
            sd.lambda_searched = std::max(sd.lambda_searched, ev.lambda);
        }
    }
    (void)e;
    std::stable_sort(sd.eigenvalues.begin(), sd.eigenvalues.end(), [](const Eigenvalue& x, const Eigenvalue& y) {
        return x.lambda < y.lambda || (x.lambda == y.lambda && x.component < y.component);
    });
    std::stable_sort(sd.modes.begin(), sd.modes.end(), [](const ModeFunction& x, const ModeFunction& y) {
        return x.lambda < y.lambda || (x.lambda == y.lambda && x.component < y.component);
    });
    return sd;
}

// ---------------------------------------------------------------------------
// Resolvent kernels g(x, y; lambda) of (A - lambda)^{-1}.

namespace detail {

inline double nearest_eigenvalue(const Operator& op, cplx lambda) {
    const double r = lambda.real();
    const double w = 1.0 + 0.5 * std::abs(r);
    auto evs = find_eigenvalues(op, r - w, r + w);
    double best = r;
    double dist = infinity;
    for (const auto& ev : evs) {
        if (std::abs(ev.lambda - r) < dist) {
            dist = std::abs(ev.lambda - r);
            best = ev.lambda;
        }
    }
    return best;
}

inline constexpr double pole_tolerance = 1e-13;

// Paper-form kernels with sqrt(lambda) = branch * principal root.
inline cplx kernel_circle(double L, double x, double y, cplx lam, int branch) {
    const cplx s = static_cast<double>(branch) * std::sqrt(lam);
    const double d = x - y;
    const cplx I(0.0, 1.0);
    const cplx den = std::exp(-I * L * s) - 1.0;
    if (std::abs(s) == 0.0 || std::abs(den) <= pole_tolerance) return cplx(infinity, 0.0);
    return I / (2.0 * s) * (std::exp(I * s * std::abs(d)) + 2.0 * std::cos(s * d) / den);
}

inline cplx kernel_robin(double alpha, double x, double y, cplx lam) {
    cplx s = std::sqrt(lam);
    if (s.imag() < 0.0) s = -s;
    const cplx I(0.0, 1.0);
    const double xl = std::min(x, y);
    const double xg = std::max(x, y);
    const cplx den = s * (std::cos(alpha) - I * s * std::sin(alpha));
    if (std::abs(s) == 0.0 || std::abs(den) <= pole_tolerance * std::max(1.0, std::abs(s) * std::abs(s)))
        return cplx(infinity, 0.0);
    return (std::cos(alpha) * std::sin(s * xl) + s * std::sin(alpha) * std::cos(s * xl)) * std::exp(I * s * xg) / den;
}

inline cplx kernel_dirichlet(double a, double x, double y, cplx lam, int branch) {
    const double xl = std::min(x, y);
    const double xg = std::max(x, y);
    if (lam == 0.0) return (a - xg) * xl / a;
    const cplx s = static_cast<double>(branch) * std::sqrt(lam);
    const cplx den = s * std::sin(a * s);
    if (std::abs(std::sin(a * s)) <= pole_tolerance * std::max(1.0, std::abs(std::cos(a * s))))
        return cplx(infinity, 0.0);
    return std::sin(s * (a - xg)) * std::sin(s * xl) / den;
}

inline cplx switch_conj(double x, double y, cplx k) { return x < y ? k : std::conj(k); }

inline cplx kernel_first_kind(const IntervalFirstKind& f, double a, double x, double y, cplx lam, int branch) {
    const double xl = std::min(x, y);
    const double xg = std::max(x, y);
    const double t11 = f.theta11;
    const double t22 = f.theta22;
    const double t12sq = std::norm(f.theta12);
    const cplx c12 = switch_conj(x, y, f.theta12);
    if (lam == 0.0) {
        const double inv = a * t12sq - t11 - a * t11 * t22 - t22 - 2 * f.theta12.real();
        if (std::abs(inv) <= 1e-12 * detail::zero_criterion_scale(f, a)) return cplx(infinity, 0.0);
        const cplx br = (a - xg) * xl * t12sq - t11 * xl + (xg - a) * xl * t11 * t22 + (xg - a) * t22 - 1.0 +
                        c12 * (xg - xl);
        return br / inv;
    }
    const cplx s = static_cast<double>(branch) * std::sqrt(lam);
    const cplx ca = std::cos(s * a);
    const cplx sa = std::sin(s * a);
    const cplx F = t11 * s * ca + t22 * s * ca - lam * sa + t11 * t22 * sa - t12sq * sa + 2 * f.theta12.real() * s;
    const cplx inv = s * F;
    const double scale = std::abs(s) * (std::abs(lam) + (std::abs(t11) + std::abs(t22)) * std::abs(s) +
                                        std::abs(t11 * t22) + t12sq + std::abs(s)) *
                         std::max(1.0, std::abs(ca) + std::abs(sa));
    if (std::abs(inv) <= pole_tolerance * scale) return cplx(infinity, 0.0);
    const cplx br = lam * std::cos(s * (a - xg)) * std::cos(s * xl) +
                    t22 * s * std::sin(s * (a - xg)) * std::cos(s * xl) +
                    t11 * s * std::cos(s * (a - xg)) * std::sin(s * xl) +
                    t11 * t22 * std::sin(s * (a - xg)) * std::sin(s * xl) +
                    t12sq * std::sin(s * (xg - a)) * std::sin(s * xl) + c12 * s * std::sin(s * (xl - xg));
    return br / inv;
}

inline cplx kernel_second_kind(const IntervalSecondKind& w, double a, double x, double y, cplx lam, int branch) {
    const double xl = std::min(x, y);
    const double xg = std::max(x, y);
    const cplx c12 = switch_conj(x, y, w.w1 * std::conj(w.w2));
    const double re = (w.w1 * std::conj(w.w2)).real();
    const double n1 = std::norm(w.w1);
    const double n2 = std::norm(w.w2);
    if (lam == 0.0) {
        const double inv = a * w.theta - 2 * re + 1.0;
        if (std::abs(inv) <= 1e-12 * detail::zero_criterion_scale(w, a)) return cplx(infinity, 0.0);
        return (w.theta * (a - xg) * xl + c12 * (xg - xl) + n1 * (a - xg) + n2 * xl) / inv;
    }
    const cplx s = static_cast<double>(branch) * std::sqrt(lam);
    const cplx inv = s * (-s * std::cos(s * a) + 2 * re * s - w.theta * std::sin(s * a));
    const double scale = std::abs(s) * (2 * std::abs(s) + std::abs(w.theta)) *
                         std::max(1.0, std::abs(std::cos(s * a)) + std::abs(std::sin(s * a)));
    if (std::abs(inv) <= pole_tolerance * scale) return cplx(infinity, 0.0);
    const cplx br = n1 * s * std::sin(s * (xg - a)) * std::cos(s * xl) + s * c12 * std::sin(s * (xl - xg)) +
                    w.theta * std::sin(s * (xg - a)) * std::sin(s * xl) -
                    n2 * s * std::cos(s * (xg - a)) * std::sin(s * xl);
    return br / inv;
}

}  // namespace detail

/// Resolvent kernel of (A_E - lambda)^{-1}. `branch` = -1 evaluates the
/// closed forms with the other square root of lambda; on the half-line the
/// root in the upper half-plane is always used. Throws PoleError on the
/// spectrum.
inline cplx greens_function(const Operator& op, Point x, Point y, cplx lambda, int branch = 1) {
    if (branch != 1 && branch != -1) throw InvalidArgument("branch must be +1 or -1");
    double mu = 0.0;
    const ExtensionSpec& e = extensions::unshifted(op.extension, mu);
    if (e.holds<DirectSum>()) {
        if (x.component != y.component) return 0.0;
        return greens_function(op.component(x.component), Point(x.x), Point(y.x), lambda, branch);
    }
    const cplx lam = lambda - mu;
    const double a = op.manifold.length;
    cplx g;
    if (e.holds<CircleClosure>()) g = detail::kernel_circle(a, x.x, y.x, lam, branch);
    else if (e.holds<HalfLineRobin>()) g = detail::kernel_robin(e.as<HalfLineRobin>().alpha, x.x, y.x, lam);
    else if (e.holds<IntervalDirichlet>()) g = detail::kernel_dirichlet(a, x.x, y.x, lam, branch);
    else if (e.holds<IntervalFirstKind>()) g = detail::kernel_first_kind(e.as<IntervalFirstKind>(), a, x.x, y.x, lam, branch);
    else g = detail::kernel_second_kind(e.as<IntervalSecondKind>(), a, x.x, y.x, lam, branch);
    if (!numerics::is_finite(g)) {
        if (e.holds<HalfLineRobin>()) {
            const double al = e.as<HalfLineRobin>().alpha;
            const double bound = al < 0.0 ? -1.0 / std::pow(std::tan(al), 2) : 0.0;
            throw PoleError(lambda, (std::abs(lam) < std::abs(lam - bound) ? 0.0 : bound) + mu);
        }
        throw PoleError(lambda, detail::nearest_eigenvalue(op, lambda));
    }
    return g;
}

/// u(x) = int g(x, y; lambda) f(y) dy for f supported in `support`; adaptive
/// composite Gauss-Legendre with the diagonal y = x as a panel break.
inline std::vector<cplx> resolvent_apply(const Operator& op, const std::function<cplx(Point)>& f,
                                         const geometry::SpatialSet& support, cplx lambda,
                                         const std::vector<Point>& xs, double rel_tol = 1e-12) {
    std::vector<cplx> out(xs.size(), 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Point x = xs[i];
        cplx total = 0.0;
        for (int c = 0; c < support.components(); ++c) {
            if (op.manifold.kind == ManifoldKind::disjoint_half_lines && c != x.component) continue;
            for (const auto& iv : support.intervals(c)) {
                std::vector<std::pair<double, double>> pieces;
                if (x.x > iv.lo && x.x < iv.hi) pieces = {{iv.lo, x.x}, {x.x, iv.hi}};
                else pieces = {{iv.lo, iv.hi}};
                auto integrand = [&](double y) { return greens_function(op, x, Point(y, c), lambda) * f(Point(y, c)); };
                // absolute floor from the whole interval: a piece next to a
                // support edge can be many orders below the rest
                double interval_mass = 0.0;
                for (auto [lo, hi] : pieces) {
                    if (!(hi > lo)) continue;
                    const auto rule = numerics::gauss_panels(lo, hi, 8);
                    for (std::size_t j = 0; j < rule.size(); ++j)
                        interval_mass += rule.weights[j] * std::abs(integrand(rule.nodes[j]));
                }
                for (auto [lo, hi] : pieces) {
                    if (!(hi > lo)) continue;
                    std::size_t panels = 1;
                    cplx prev = numerics::integrate(integrand, numerics::gauss_panels(lo, hi, panels));
                    bool done = false;
                    while (panels < 4096) {
                        panels *= 2;
                        const auto rule = numerics::gauss_panels(lo, hi, panels);
                        const cplx cur = numerics::integrate(integrand, rule);
                        double mass = 0.0;
                        for (std::size_t j = 0; j < rule.size(); ++j) mass += rule.weights[j] * std::abs(integrand(rule.nodes[j]));
                        if (std::abs(cur - prev) <= rel_tol * std::abs(cur) + 1e-15 * std::max(mass, interval_mass)) {
                            prev = cur;
                            done = true;
                            break;
                        }
                        prev = cur;
                    }
                    if (!done) throw ConvergenceError("resolvent quadrature did not converge", lo, hi);
                    total += prev;
                }
            }
        }
        out[i] = total;
    }
    return out;
}

/// Robin continuum density (1/pi) Im g(x, y; lambda + i0) by Richardson
/// extrapolation over eps in {1e-3, 1e-4, 1e-5} (1 + lambda).
inline double continuum_density(const Operator& op, Point x, Point y, double lambda) {
    double mu = 0.0;
    const ExtensionSpec& e = extensions::unshifted(op.extension, mu);
    Operator target = op;
    if (e.holds<DirectSum>()) {
        if (x.component != y.component) return 0.0;
        target = op.component(x.component);
    }
    double cmu = 0.0;
    const ExtensionSpec& ce = extensions::unshifted(target.extension, cmu);
    if (!ce.holds<HalfLineRobin>()) throw InvalidArgument("continuum density exists only for Robin half-lines");
    if (!(lambda > cmu)) throw InvalidArgument("continuum density needs lambda above the continuum edge");
    const std::array<double, 3> eps = {1e-3 * (1 + lambda), 1e-4 * (1 + lambda), 1e-5 * (1 + lambda)};
    std::array<double, 3> v{};
    for (int j = 0; j < 3; ++j)
        v[j] = greens_function(target, Point(x.x), Point(y.x), cplx(lambda, eps[j])).imag() / pi;
    // Neville tableau at eps = 0
    std::array<double, 3> p = v;
    double two_point = 0.0;
    for (int m = 1; m < 3; ++m) {
        for (int j = 2; j >= m; --j) p[j] = (eps[j - m] * p[j] - eps[j] * p[j - 1]) / (eps[j - m] - eps[j]);
        if (m == 1) two_point = p[2];
    }
    const double value = p[2];
    const double err = std::abs(value - two_point);
    if (!(err <= 1e-6 * std::max(std::abs(value), 1e-6)))
        throw ConvergenceError("continuum density extrapolation did not settle", lambda, lambda);
    return value;
}

}  // namespace kgspec::spectral
