#pragma once

#include "kgspec/geometry.hpp"
#include "kgspec/scalars.hpp"
#include "kgspec/spectral.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace kgspec::evolution {

using extensions::ExtensionSpec;
using extensions::Operator;
using geometry::Interval;
using geometry::ManifoldKind;
using geometry::ManifoldSpec;
using geometry::Point;
using geometry::SpatialSet;
using spectral::ContinuumDescriptor;
using spectral::ModeFunction;

inline double bump_shape(double u) {
    if (!(std::abs(u) < 1.0)) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - u * u));
}

inline double bump_shape_derivative(double u) {
    if (!(std::abs(u) < 1.0)) return 0.0;
    const double q = 1.0 - u * u;
    return -2.0 * u / (q * q) * std::exp(1.0 - 1.0 / q);
}

inline SpatialSet set_union(SpatialSet a, const SpatialSet& b) {
    for (int c = 0; c < b.components(); ++c)
        for (const auto& iv : b.intervals(c)) a.add(iv, c);
    return a;
}

/// Complex-valued function on Sigma with declared support. Values outside
/// the support are reported as zero.
class Profile {
public:
    using Function = std::function<cplx(Point)>;

    Profile() = default;
    Profile(Function f, SpatialSet support, double feature_width = infinity) {
        terms_.push_back(Term{std::move(f), support, 1.0});
        support_ = std::move(support);
        feature_ = feature_width;
    }

    cplx operator()(Point p) const {
        cplx v = 0.0;
        for (const auto& t : terms_)
            if (t.support.contains(p)) v += t.scale * t.f(p);
        return v;
    }

    const SpatialSet& support() const { return support_; }
    bool empty() const { return terms_.empty(); }
    /// Smallest length scale of the profile (bump half-width, mode wavelength).
    double feature_width() const { return feature_; }

    Profile& operator+=(const Profile& other) {
        terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
        support_ = set_union(support_, other.support_);
        feature_ = std::min(feature_, other.feature_);
        return *this;
    }
    friend Profile operator+(Profile a, const Profile& b) { return a += b; }
    friend Profile operator*(cplx s, Profile p) {
        for (auto& t : p.terms_) t.scale *= s;
        return p;
    }

private:
    struct Term {
        Function f;
        SpatialSet support;
        cplx scale;
    };
    std::vector<Term> terms_;
    SpatialSet support_;
    double feature_ = infinity;
};

/// amplitude * exp(1 - 1/(1 - u^2)), u = (x - center)/halfwidth, on one
/// component. Circle positions are compared modulo the circumference.
namespace detail {

inline Profile bump_profile(const ManifoldSpec& m, double center, double halfwidth, cplx amplitude, int component,
                            bool derivative) {
    if (!(halfwidth > 0.0)) throw InvalidArgument("bump halfwidth must be positive");
    if (component < 0 || component >= m.components()) throw InvalidArgument("bump component out of range");
    const bool circle = m.kind == ManifoldKind::circle;
    if (circle && !(2 * halfwidth < m.length)) throw InvalidArgument("bump wider than the circle");
    if (circle && (center < 0.0 || center >= m.length)) throw InvalidArgument("bump center outside [0, L)");
    SpatialSet point(m.components());
    point.add({center, center}, component);
    SpatialSet support = geometry::closed_neighborhood(m, point, halfwidth).set;
    if (!circle) geometry::require_interior(m, support);
    const double period = circle ? m.length : 0.0;
    auto f = [=](Point p) -> cplx {
        double d = p.x - center;
        if (period > 0.0) d = std::remainder(d, period);
        const double u = d / halfwidth;
        return derivative ? amplitude * bump_shape_derivative(u) / halfwidth : amplitude * bump_shape(u);
    };
    return Profile(f, support, halfwidth);
}

}  // namespace detail

inline Profile make_bump(const ManifoldSpec& m, double center, double halfwidth, cplx amplitude = 1.0,
                         int component = 0) {
    return detail::bump_profile(m, center, halfwidth, amplitude, component, false);
}

/// amplitude * d/dx of the bump; amplitude -1 as phidot0 next to the bump as
/// phi0 gives a pulse moving towards larger x.
inline Profile make_bump_derivative(const ManifoldSpec& m, double center, double halfwidth, cplx amplitude = 1.0,
                                    int component = 0) {
    return detail::bump_profile(m, center, halfwidth, amplitude, component, true);
}

/// amplitude * e_n as data. On the half-line the exponential tail is cut
/// where it falls below e^{-40}.
inline Profile mode_profile(const ManifoldSpec& m, const ModeFunction& mode, cplx amplitude = 1.0) {
    double extent = m.length;
    if (m.is_half_line_like()) {
        if (mode.tag != spectral::ModeTag::exponential_decay || !(mode.k > 0.0))
            throw InvalidArgument("half-line mode data needs a decaying eigenfunction");
        extent = 40.0 / mode.k;
    }
    SpatialSet support(m.components());
    support.add({0.0, extent}, mode.component);
    const double feature = mode.k > 0.0 ? 1.0 / mode.k : infinity;
    return Profile([mode, amplitude](Point p) { return amplitude * mode.value(p.x); }, support, feature);
}

struct CauchyData {
    Profile phi0;
    Profile phidot0;
    std::vector<Point> grid;  // output sample points

    SpatialSet support() const { return set_union(phi0.support(), phidot0.support()); }
};

struct FieldState {
    double t = 0.0;
    std::vector<Point> grid;
    std::vector<cplx> phi;
    std::vector<cplx> phidot;
};

/// Sample points: interior nodes j*a/n of an interval, j*L/n on a circle,
/// j*extent/n (j = 1..n) on each half-line.
inline std::vector<Point> uniform_grid(const ManifoldSpec& m, int n, double extent = 0.0) {
    if (n < 2) throw InvalidArgument("grid needs at least 2 points");
    std::vector<Point> g;
    for (int c = 0; c < m.components(); ++c) {
        switch (m.kind) {
            case ManifoldKind::interval:
                for (int j = 1; j < n; ++j) g.emplace_back(m.length * j / n, c);
                break;
            case ManifoldKind::circle:
                for (int j = 0; j < n; ++j) g.emplace_back(m.length * j / n, c);
                break;
            default:
                if (!(extent > 0.0)) throw InvalidArgument("half-line grid needs a positive extent");
                for (int j = 1; j <= n; ++j) g.emplace_back(extent * j / n, c);
                break;
        }
    }
    return g;
}

struct EvolveOptions {
    std::size_t modes = 0;  // fixed truncation per component; 0 picks it from the Parseval defect
    std::size_t max_modes = 512;
    double parseval_tol = 1e-8;
    double continuum_tail_tol = 1e-22;  // relative weight of the dropped continuum tail
    double continuum_horizon = 30.0;    // largest |t| + x evaluated on a half-line
    double continuum_k_cap = 4000.0;
    double warn_defect = 1e-4;
};

/// Midpoint lattice k_j = (j + 1/2) dk on the continuum of one half-line.
/// The integrands are even in k, so the lattice sum is the full-line
/// trapezoid rule; dk leaves room for the spatial reach of the solution and
/// for the width |cot alpha| of the normalization poles.
struct ContinuumGrid {
    ContinuumDescriptor desc;
    double dk = 0.0;
    std::size_t count = 0;
    double horizon = 0.0;

    double k(std::size_t j) const { return (static_cast<double>(j) + 0.5) * dk; }
    double k_max() const { return count == 0 ? 0.0 : k(count - 1); }
};

/// Truncated spectral basis shared by every solution built on it.
struct Basis {
    Operator op;
    spectral::SpectralData spectrum;
    std::vector<ContinuumGrid> continuum;
    std::vector<std::string> warnings;

    explicit Basis(Operator o) : op(std::move(o)) {}

    std::size_t modes_in(int component) const {
        std::size_t n = 0;
        for (const auto& m : spectrum.modes) n += m.component == component;
        return n;
    }
    /// Largest wavenumber represented on a component (sets quadrature resolution).
    double k_max(int component) const {
        double k = 1.0;
        for (const auto& m : spectrum.modes)
            if (m.component == component) k = std::max(k, m.k);
        for (const auto& g : continuum)
            if (g.desc.component == component) k = std::max(k, g.k_max());
        return k;
    }
};

struct ContinuumCoefficients {
    std::vector<cplx> c;
    std::vector<cplx> d;
};

struct ModeCoefficients {
    std::vector<double> lambda;  // per basis mode
    std::vector<cplx> c;         // <phi0, e_n>
    std::vector<cplx> d;         // <phidot0, e_n>
    std::vector<ContinuumCoefficients> continuum;  // per basis continuum grid
    // d + kappa c and d - kappa c for modes with lambda = -kappa^2 < 0 (zero
    // elsewhere); they evolve by e^{kappa t} and e^{-kappa t}, so growing
    // modes are carried without cancellation. Empty when absent.
    std::vector<cplx> up, um;
    double norm2_phi0 = 0.0;
    double norm2_phidot0 = 0.0;
    double parseval_defect = 0.0;  // relative, worse of phi0 and phidot0
    std::vector<std::string> warnings;
};

/// Recompute the characteristic pair (up, um) from c and d.
inline void sync_characteristic(ModeCoefficients& co) {
    co.up.assign(co.c.size(), 0.0);
    co.um.assign(co.c.size(), 0.0);
    for (std::size_t n = 0; n < co.c.size(); ++n) {
        if (!(co.lambda[n] < 0.0)) continue;
        const double kappa = std::sqrt(-co.lambda[n]);
        co.up[n] = co.d[n] + kappa * co.c[n];
        co.um[n] = co.d[n] - kappa * co.c[n];
    }
}

namespace detail {

inline numerics::QuadratureRule rule_on(const SpatialSet& s, int component, double width) {
    numerics::QuadratureRule r;
    for (const auto& iv : s.intervals(component)) r.append(numerics::gauss_composite(iv.lo, iv.hi, width, 4));
    return r;
}

inline double panel_width(double k_max, double feature) { return std::min(8.0 / k_max, feature / 8.0); }

struct Sampled {
    numerics::QuadratureRule rule;
    std::vector<cplx> values;
    double norm2 = 0.0;
};

inline Sampled sample(const Profile& f, int component, double k_max) {
    Sampled s;
    if (f.empty()) return s;
    s.rule = rule_on(f.support(), component, panel_width(k_max, f.feature_width()));
    s.values.resize(s.rule.size());
    for (std::size_t i = 0; i < s.rule.size(); ++i) {
        s.values[i] = f(Point(s.rule.nodes[i], component));
        s.norm2 += s.rule.weights[i] * std::norm(s.values[i]);
    }
    return s;
}

inline cplx project_mode(const ModeFunction& m, const Sampled& s) {
    cplx acc = 0.0;
    for (std::size_t i = 0; i < s.rule.size(); ++i)
        acc += s.rule.weights[i] * std::conj(m.value(s.rule.nodes[i])) * s.values[i];
    return acc;
}

/// Calls f(j, psi_{k_j}(x)) for j in [first, first + count), plane waves
/// advanced by rotation and reseeded every 64 steps.
template <class F>
void psi_sweep(const ContinuumGrid& g, std::size_t first, std::size_t count, double x, F&& f) {
    const double ca = std::cos(g.desc.alpha);
    const double sa = std::sin(g.desc.alpha);
    const double norm = std::sqrt(2.0 / pi);
    const cplx step = std::polar(1.0, g.dk * x);
    cplx z = 0.0;
    for (std::size_t j = first; j < first + count; ++j) {
        const double k = g.k(j);
        if ((j - first) % 64 == 0)
            z = std::polar(1.0, k * x);
        else
            z *= step;
        const double n = std::sqrt(k * k * sa * sa + ca * ca);
        f(j, norm * (k * sa * z.real() + ca * z.imag()) / n);
    }
}

/// f^(k_j) = int psi_{k_j} f for j in [first, first + count).
inline std::vector<cplx> project_continuum(const ContinuumGrid& g, std::size_t first, std::size_t count,
                                           const Sampled& s) {
    std::vector<cplx> out(count, 0.0);
    for (std::size_t i = 0; i < s.rule.size(); ++i) {
        const cplx v = s.rule.weights[i] * s.values[i];
        if (v == 0.0) continue;
        psi_sweep(g, first, count, s.rule.nodes[i], [&](std::size_t j, double psi) { out[j - first] += psi * v; });
    }
    return out;
}

inline double pole_width(const ContinuumDescriptor& d) {
    const double s = std::sin(d.alpha);
    const double c = std::cos(d.alpha);
    return std::abs(s) <= 1e-12 || std::abs(c) <= 1e-12 ? infinity : std::abs(c / s);
}

/// Lattice up to the first point after which the last stretch of width 2 in
/// k carries less than tail_tol of the data norm.
inline ContinuumGrid continuum_grid(const ContinuumDescriptor& desc, const std::vector<const Profile*>& data,
                                    const EvolveOptions& o, std::vector<std::string>& warnings) {
    ContinuumGrid g{desc, 0.0, 0, 0.0};
    double supK = 0.0;
    for (const Profile* p : data) {
        const auto& ivs = p->support().intervals(desc.component);
        if (!ivs.empty()) supK = std::max(supK, ivs.back().hi);
    }
    g.horizon = o.continuum_horizon;
    const double reach = o.continuum_horizon + supK + 37.0 / pole_width(desc);
    g.dk = 2 * pi / reach;
    double k_res = 16.0;
    std::vector<Sampled> samples;
    double total = 0.0;
    auto resample = [&] {
        samples.clear();
        total = 0.0;
        for (const Profile* p : data) {
            samples.push_back(sample(*p, desc.component, k_res));
            total += samples.back().norm2;
        }
    };
    resample();
    if (total == 0.0) return g;
    const auto block = static_cast<std::size_t>(std::max(1.0, std::ceil(0.25 / g.dk)));
    std::vector<double> recent;
    for (int b = 0;; ++b) {
        const std::size_t first = g.count;
        if (g.k(first + block) > k_res) {
            while (g.k(first + block) > k_res) k_res *= 2.0;
            resample();
        }
        double weight = 0.0;
        for (const auto& s : samples)
            for (auto f : project_continuum(g, first, block, s)) weight += g.dk * std::norm(f);
        g.count += block;
        recent.push_back(weight);
        if (recent.size() > 8) recent.erase(recent.begin());
        double tail = 0.0;
        for (double r : recent) tail += r;
        if (b >= 8 && tail <= o.continuum_tail_tol * total) break;
        if (g.k_max() >= o.continuum_k_cap) {
            warnings.push_back("continuum cutoff reached k = " + std::to_string(g.k_max()) +
                               " before the tail tolerance");
            break;
        }
    }
    return g;
}

inline void fill_coefficients(const Basis& b, const CauchyData& data, ModeCoefficients& out) {
    const auto& modes = b.spectrum.modes;
    out.lambda.resize(modes.size());
    out.c.assign(modes.size(), 0.0);
    out.d.assign(modes.size(), 0.0);
    out.continuum.assign(b.continuum.size(), {});
    out.norm2_phi0 = out.norm2_phidot0 = 0.0;
    double captured0 = 0.0, captured1 = 0.0;
    for (int comp = 0; comp < b.op.components(); ++comp) {
        const double kmax = b.k_max(comp);
        const Sampled s0 = sample(data.phi0, comp, kmax);
        const Sampled s1 = sample(data.phidot0, comp, kmax);
        out.norm2_phi0 += s0.norm2;
        out.norm2_phidot0 += s1.norm2;
        for (std::size_t n = 0; n < modes.size(); ++n) {
            if (modes[n].component != comp) continue;
            if (s0.norm2 > 0.0) out.c[n] = project_mode(modes[n], s0);
            if (s1.norm2 > 0.0) out.d[n] = project_mode(modes[n], s1);
        }
        for (std::size_t g = 0; g < b.continuum.size(); ++g) {
            const auto& grid = b.continuum[g];
            if (grid.desc.component != comp) continue;
            out.continuum[g].c = project_continuum(grid, 0, grid.count, s0);
            out.continuum[g].d = project_continuum(grid, 0, grid.count, s1);
        }
    }
    for (std::size_t n = 0; n < modes.size(); ++n) {
        out.lambda[n] = modes[n].lambda;
        captured0 += std::norm(out.c[n]);
        captured1 += std::norm(out.d[n]);
    }
    for (std::size_t g = 0; g < b.continuum.size(); ++g) {
        for (std::size_t j = 0; j < b.continuum[g].count; ++j) {
            captured0 += b.continuum[g].dk * std::norm(out.continuum[g].c[j]);
            captured1 += b.continuum[g].dk * std::norm(out.continuum[g].d[j]);
        }
    }
    auto rel = [](double total, double captured) { return total > 0.0 ? std::abs(total - captured) / total : 0.0; };
    out.parseval_defect = std::max(rel(out.norm2_phi0, captured0), rel(out.norm2_phidot0, captured1));
    sync_characteristic(out);
}

}  // namespace detail

/// Spectrum truncated per component to the smallest eigenvalue-closed
/// prefix whose Parseval defect is below parseval_tol for every data set.
inline std::shared_ptr<const Basis> make_basis(const Operator& op, const std::vector<const CauchyData*>& data,
                                               const EvolveOptions& o = {}) {
    auto b = std::make_shared<Basis>(op);
    const std::size_t request = o.modes > 0 ? o.modes : o.max_modes;
    b->spectrum = spectral::compute_spectrum(op, {request, infinity, -infinity});
    std::vector<const Profile*> profiles;
    for (const auto* d : data) {
        profiles.push_back(&d->phi0);
        profiles.push_back(&d->phidot0);
    }
    for (const auto& desc : b->spectrum.continua)
        b->continuum.push_back(detail::continuum_grid(desc, profiles, o, b->warnings));
    if (o.modes > 0 || data.empty()) return b;

    std::vector<ModeCoefficients> coeffs(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) detail::fill_coefficients(*b, *data[i], coeffs[i]);
    auto& modes = b->spectrum.modes;
    std::vector<bool> keep(modes.size(), true);
    for (int comp = 0; comp < op.components(); ++comp) {
        std::vector<std::size_t> idx;
        for (std::size_t n = 0; n < modes.size(); ++n)
            if (modes[n].component == comp) idx.push_back(n);
        // remaining weight of each function after the first j modes of this component
        std::size_t cut = idx.size();
        for (std::size_t j = 0; j <= idx.size(); ++j) {
            if (j > 0 && j < idx.size() && modes[idx[j]].lambda == modes[idx[j - 1]].lambda) continue;
            bool ok = true;
            for (const auto& c : coeffs) {
                for (int which = 0; which < 2 && ok; ++which) {
                    const auto& v = which == 0 ? c.c : c.d;
                    const double total = which == 0 ? c.norm2_phi0 : c.norm2_phidot0;
                    if (total == 0.0) continue;
                    double rest = 0.0;
                    for (std::size_t r = j; r < idx.size(); ++r) rest += std::norm(v[idx[r]]);
                    ok = rest <= o.parseval_tol * total;
                }
                if (!ok) break;
            }
            if (ok) {
                cut = j;
                break;
            }
        }
        for (std::size_t r = cut; r < idx.size(); ++r) keep[idx[r]] = false;
    }
    std::vector<ModeFunction> kept;
    for (std::size_t n = 0; n < modes.size(); ++n)
        if (keep[n]) kept.push_back(modes[n]);
    modes = std::move(kept);
    std::vector<spectral::Eigenvalue> evs;
    for (const auto& ev : b->spectrum.eigenvalues) {
        for (const auto& m : modes) {
            if (m.component == ev.component && m.lambda == ev.lambda) {
                evs.push_back(ev);
                break;
            }
        }
    }
    b->spectrum.eigenvalues = std::move(evs);
    return b;
}

/// c_n = <phi0, e_n>, d_n = <phidot0, e_n> and continuum transforms on the
/// basis grid, with the relative Parseval defect.
inline ModeCoefficients mode_coefficients(const Basis& b, const CauchyData& data, const EvolveOptions& o = {}) {
    ModeCoefficients out;
    detail::fill_coefficients(b, data, out);
    out.warnings = b.warnings;
    if (out.parseval_defect > o.warn_defect) out.warnings.push_back("mode truncation insufficient");
    return out;
}

/// Coefficients of (phi_t, phidot_t):
///   c(t) = C(t, lambda) c + S(t, lambda) d,  d(t) = -lambda S(t, lambda) c + C(t, lambda) d.
/// Modes with lambda < 0 advance (up, um) instead when present.
inline ModeCoefficients advance(const Basis& b, const ModeCoefficients& in, double t) {
    ModeCoefficients out = in;
    const bool split = in.up.size() == in.c.size();
    for (std::size_t n = 0; n < in.c.size(); ++n) {
        const double lam = in.lambda[n];
        if (split && lam < 0.0) {
            const double kappa = std::sqrt(-lam);
            if (kappa * std::abs(t) > scalars::overflow_exponent) throw OverflowError(kappa * std::abs(t));
            out.up[n] = std::exp(kappa * t) * in.up[n];
            out.um[n] = std::exp(-kappa * t) * in.um[n];
            out.c[n] = (out.up[n] - out.um[n]) / (2.0 * kappa);
            out.d[n] = 0.5 * (out.up[n] + out.um[n]);
            continue;
        }
        const double C = c_scalar(t, lam);
        const double S = s_scalar(t, lam);
        out.c[n] = C * in.c[n] + S * in.d[n];
        out.d[n] = -lam * S * in.c[n] + C * in.d[n];
    }
    for (std::size_t g = 0; g < in.continuum.size(); ++g) {
        const auto& grid = b.continuum[g];
        for (std::size_t j = 0; j < grid.count; ++j) {
            const double lam = grid.desc.lambda(grid.k(j));
            const double C = c_scalar(t, lam);
            const double S = s_scalar(t, lam);
            out.continuum[g].c[j] = C * in.continuum[g].c[j] + S * in.continuum[g].d[j];
            out.continuum[g].d[j] = -lam * S * in.continuum[g].c[j] + C * in.continuum[g].d[j];
        }
    }
    return out;
}

/// Sum of coefficient vectors against the basis at x; `use_d` selects d.
inline cplx reconstruct(const Basis& b, const ModeCoefficients& co, Point x, bool use_d) {
    const auto& v = use_d ? co.d : co.c;
    cplx acc = 0.0;
    const auto& modes = b.spectrum.modes;
    for (std::size_t n = 0; n < modes.size(); ++n)
        if (modes[n].component == x.component && v[n] != 0.0) acc += v[n] * modes[n].value(x.x);
    for (std::size_t g = 0; g < b.continuum.size(); ++g) {
        const auto& grid = b.continuum[g];
        if (grid.desc.component != x.component) continue;
        const auto& f = use_d ? co.continuum[g].d : co.continuum[g].c;
        cplx part = 0.0;
        detail::psi_sweep(grid, 0, grid.count, x.x, [&](std::size_t j, double psi) { part += f[j] * psi; });
        acc += grid.dk * part;
    }
    return acc;
}

/// Weighted squared norm sum_n |v_n|^2 + int |v(k)|^2 dk.
inline double coefficient_norm2(const Basis& b, const ModeCoefficients& co, bool use_d) {
    const auto& v = use_d ? co.d : co.c;
    double s = 0.0;
    for (auto z : v) s += std::norm(z);
    for (std::size_t g = 0; g < b.continuum.size(); ++g) {
        const auto& f = use_d ? co.continuum[g].d : co.continuum[g].c;
        for (std::size_t j = 0; j < f.size(); ++j) s += b.continuum[g].dk * std::norm(f[j]);
    }
    return s;
}

/// A solution phi(t, x) determined by its coefficients at t = 0.
class Solution {
public:
    Solution(std::shared_ptr<const Basis> basis, ModeCoefficients c0, SpatialSet support)
        : basis_(std::move(basis)), c0_(std::move(c0)), support_(std::move(support)) {}

    const Basis& basis() const { return *basis_; }
    const std::shared_ptr<const Basis>& basis_ptr() const { return basis_; }
    const ModeCoefficients& coefficients() const { return c0_; }
    /// Support of the data at t = 0.
    const SpatialSet& support() const { return support_; }

    ModeCoefficients coefficients_at(double t) const { return advance(*basis_, c0_, t); }

    /// s -> phi(s + t)
    Solution advanced(double t) const {
        return Solution(basis_, coefficients_at(t), geometry::closed_neighborhood(basis_->op.manifold, support_, std::abs(t)).set);
    }
    /// s -> phi(-s): data (phi0, -phidot0).
    Solution reflected() const {
        ModeCoefficients c = c0_;
        for (auto& z : c.d) z = -z;
        for (auto& g : c.continuum)
            for (auto& z : g.d) z = -z;
        std::swap(c.up, c.um);
        for (auto& z : c.up) z = -z;
        for (auto& z : c.um) z = -z;
        return Solution(basis_, std::move(c), support_);
    }

    cplx phi(double t, Point x) const {
        check_horizon(t, x);
        return reconstruct(*basis_, coefficients_at(t), x, false);
    }
    cplx phidot(double t, Point x) const {
        check_horizon(t, x);
        return reconstruct(*basis_, coefficients_at(t), x, true);
    }

    FieldState state(double t, const std::vector<Point>& grid) const {
        const ModeCoefficients ct = coefficients_at(t);
        FieldState s{t, grid, {}, {}};
        s.phi.reserve(grid.size());
        s.phidot.reserve(grid.size());
        for (const auto& p : grid) {
            check_horizon(t, p);
            s.phi.push_back(reconstruct(*basis_, ct, p, false));
            s.phidot.push_back(reconstruct(*basis_, ct, p, true));
        }
        return s;
    }

    /// ||phi_t||^2 and ||phidot_t||^2 from the coefficients.
    double norm2_phi(double t) const { return coefficient_norm2(*basis_, coefficients_at(t), false); }
    double norm2_phidot(double t) const { return coefficient_norm2(*basis_, coefficients_at(t), true); }

    /// Continuum lattices alias beyond |t| + x = horizon.
    void check_horizon(double t, Point x) const {
        for (const auto& g : basis_->continuum)
            if (g.desc.component == x.component && g.count > 0 && std::abs(t) + x.x > g.horizon)
                throw InvalidArgument("evaluation beyond the continuum horizon " + std::to_string(g.horizon));
    }

private:
    std::shared_ptr<const Basis> basis_;
    ModeCoefficients c0_;
    SpatialSet support_;
};

inline Solution solve(std::shared_ptr<const Basis> b, const CauchyData& data, const EvolveOptions& o = {}) {
    auto c = mode_coefficients(*b, data, o);
    return Solution(std::move(b), std::move(c), data.support());
}

inline Solution solve(const Operator& op, const CauchyData& data, const EvolveOptions& o = {}) {
    return solve(make_basis(op, {&data}, o), data, o);
}

/// phi_t = C(t, A) phi0 + S(t, A) phidot0 and phidot_t on data.grid.
inline FieldState evolve(const Operator& op, const CauchyData& data, double t, const EvolveOptions& o = {}) {
    return solve(op, data, o).state(t, data.grid);
}

/// Region carrying phi_t: the closure of Sigma for compact components, the
/// data support grown by |t| + margin on half-lines.
inline SpatialSet solution_domain(const Solution& s, double t, double margin = 2.0) {
    const auto& m = s.basis().op.manifold;
    SpatialSet d(m.components());
    for (int c = 0; c < m.components(); ++c) {
        if (!m.is_half_line_like()) {
            d.add({0.0, m.length}, c);
        } else {
            const auto& ivs = s.support().intervals(c);
            if (!ivs.empty()) d.add({0.0, ivs.back().hi + std::abs(t) + margin}, c);
        }
    }
    return d;
}

/// Quadrature rule per component on `domain`, resolving the basis.
inline std::vector<numerics::QuadratureRule> domain_rules(const Basis& b, const SpatialSet& domain) {
    std::vector<numerics::QuadratureRule> rules;
    for (int c = 0; c < b.op.components(); ++c) {
        double extent = 0.0;
        for (const auto& iv : domain.intervals(c)) extent = std::max(extent, iv.length());
        rules.push_back(detail::rule_on(domain, c, detail::panel_width(b.k_max(c), std::max(extent, 1e-300) * 2.0)));
    }
    return rules;
}

/// Data (phi_t, phidot_t) of a solution as a new Cauchy data set.
inline CauchyData state_as_data(const Solution& s, double t) {
    auto ct = std::make_shared<ModeCoefficients>(s.coefficients_at(t));
    auto basis = s.basis_ptr();
    const SpatialSet dom = solution_domain(s, t);
    double feature = infinity;
    CauchyData d;
    d.phi0 = Profile([ct, basis](Point p) { return reconstruct(*basis, *ct, p, false); }, dom, feature);
    d.phidot0 = Profile([ct, basis](Point p) { return reconstruct(*basis, *ct, p, true); }, dom, feature);
    return d;
}

/// Relative L2 distance between (phi, phidot) of two solutions at given times.
inline double l2_relative_distance(const Solution& a, double ta, const Solution& b, double tb) {
    const SpatialSet dom = set_union(solution_domain(a, ta), solution_domain(b, tb));
    const auto rules = domain_rules(a.basis(), dom);
    const auto ca = a.coefficients_at(ta);
    const auto cb = b.coefficients_at(tb);
    double diff = 0.0, ref = 0.0;
    for (int c = 0; c < static_cast<int>(rules.size()); ++c) {
        const auto& r = rules[c];
        for (std::size_t i = 0; i < r.size(); ++i) {
            const Point p(r.nodes[i], c);
            for (bool use_d : {false, true}) {
                const cplx u = reconstruct(a.basis(), ca, p, use_d);
                const cplx v = reconstruct(b.basis(), cb, p, use_d);
                diff += r.weights[i] * std::norm(u - v);
                ref += r.weights[i] * std::norm(u);
            }
        }
    }
    if (ref == 0.0) return std::sqrt(diff);
    return std::sqrt(diff / ref);
}

/// ||phi_{t1+t2} - (evolution by t2 of the data phi_{t1})|| relative, the
/// intermediate state re-projected onto the basis by quadrature.
inline double check_composition(const Operator& op, const CauchyData& data, double t1, double t2,
                                const EvolveOptions& o = {}) {
    auto b = make_basis(op, {&data}, o);
    const Solution s = solve(b, data, o);
    const Solution s2 = solve(b, state_as_data(s, t1), o);
    return l2_relative_distance(s, t1 + t2, s2, t2);
}

/// || (A S(t,A)^2 + C(t,A)^2 - 1) data || / ||data||, applied modewise.
inline double check_pythagoras(const Solution& s, double t) {
    const auto& b = s.basis();
    const auto& co = s.coefficients();
    double defect = 0.0, ref = 0.0;
    auto add = [&](double lam, double w, cplx c, cplx d) {
        const double C = c_scalar(t, lam);
        const double S = s_scalar(t, lam);
        const double e = lam * S * S + C * C - 1.0;
        defect += w * e * e * (std::norm(c) + std::norm(d));
        ref += w * (std::norm(c) + std::norm(d));
    };
    for (std::size_t n = 0; n < co.c.size(); ++n) add(co.lambda[n], 1.0, co.c[n], co.d[n]);
    for (std::size_t g = 0; g < b.continuum.size(); ++g)
        for (std::size_t j = 0; j < b.continuum[g].count; ++j)
            add(b.continuum[g].desc.lambda(b.continuum[g].k(j)), b.continuum[g].dk, co.continuum[g].c[j],
                co.continuum[g].d[j]);
    return ref > 0.0 ? std::sqrt(defect / ref) : 0.0;
}

inline double check_pythagoras(const Operator& op, const CauchyData& data, double t, const EvolveOptions& o = {}) {
    return check_pythagoras(solve(op, data, o), t);
}

/// L2 norm of (phi_{t+h} - 2 phi_t + phi_{t-h})/h^2 + A phi_t, with A phi_t
/// summed modewise.
inline double second_derivative_check(const Solution& s, double t, double h) {
    const auto& b = s.basis();
    const auto rules = domain_rules(b, solution_domain(s, std::abs(t) + h));
    const auto cp = s.coefficients_at(t + h);
    const auto c0 = s.coefficients_at(t);
    const auto cm = s.coefficients_at(t - h);
    ModeCoefficients a = c0;
    a.up.clear();
    a.um.clear();
    for (std::size_t n = 0; n < a.c.size(); ++n) a.c[n] = -a.lambda[n] * c0.c[n];
    for (std::size_t g = 0; g < b.continuum.size(); ++g)
        for (std::size_t j = 0; j < b.continuum[g].count; ++j)
            a.continuum[g].c[j] = -b.continuum[g].desc.lambda(b.continuum[g].k(j)) * c0.continuum[g].c[j];
    double defect = 0.0;
    for (int c = 0; c < static_cast<int>(rules.size()); ++c) {
        const auto& r = rules[c];
        for (std::size_t i = 0; i < r.size(); ++i) {
            const Point p(r.nodes[i], c);
            const cplx fd = (reconstruct(b, cp, p, false) - 2.0 * reconstruct(b, c0, p, false) +
                             reconstruct(b, cm, p, false)) /
                            (h * h);
            defect += r.weights[i] * std::norm(fd - reconstruct(b, a, p, false));
        }
    }
    return std::sqrt(defect);
}

inline double second_derivative_check(const Operator& op, const CauchyData& data, double t, double h,
                                      const EvolveOptions& o = {}) {
    return second_derivative_check(solve(op, data, o), t, h);
}

/// Interval (0, L) standing in for a Robin half-line up to time t_max: Robin
/// at 0, Dirichlet at L, with L beyond the reach of the data and of the
/// bound-state tail (e^{-kappa (L - sup K)} cosh(kappa t_max) < tail).
inline Operator truncated_operator(const Operator& op, const SpatialSet& K, double t_max, double tail = 1e-8) {
    double mu = 0.0;
    const ExtensionSpec& e = extensions::unshifted(op.extension, mu);
    if (op.manifold.kind != ManifoldKind::half_line || !e.holds<extensions::HalfLineRobin>())
        throw InvalidArgument("truncated domain needs a Robin half-line");
    const double alpha = e.as<extensions::HalfLineRobin>().alpha;
    const double supK = K.empty() ? 0.0 : K.sup();
    double L = supK + std::abs(t_max) + 1.0;
    if (alpha < 0.0) {
        const double kappa = -1.0 / std::tan(alpha);
        // log cosh without overflow
        const double kt = kappa * std::abs(t_max);
        const double logcosh = kt + std::log1p(std::exp(-2 * kt)) - std::log(2.0);
        L = std::max(L, supK + (logcosh - std::log(tail)) / kappa);
    }
    ExtensionSpec inner;
    if (alpha == 0.0)
        inner = extensions::IntervalDirichlet{};
    else
        inner = extensions::IntervalSecondKind{1.0, 0.0, std::cos(alpha) / std::sin(alpha)};
    if (mu != 0.0) inner = extensions::mass_shift(inner, mu);
    return Operator(ManifoldSpec::interval(L), inner);
}

}  // namespace kgspec::evolution
