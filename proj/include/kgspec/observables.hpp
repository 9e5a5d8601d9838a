#pragma once

#include "kgspec/evolution.hpp"

#include <optional>

namespace kgspec::observables {

using evolution::ModeCoefficients;
using evolution::Solution;
using geometry::Point;
using geometry::SpatialSet;

namespace detail {

inline void require_same_basis(const Solution& a, const Solution& b) {
    if (a.basis_ptr() != b.basis_ptr()) throw InvalidArgument("solutions must share one spectral basis");
}

/// sum_n w_n f(lambda_n, coefficient pair a_n, coefficient pair b_n); modes
/// with lambda < 0 go through g(kappa, up_n, um_n, up'_n, um'_n) instead when
/// both sides carry the characteristic pair.
template <class F, class G = std::nullptr_t>
cplx pair_sum(const Solution& a, const ModeCoefficients& ca, const ModeCoefficients& cb, F&& f, G&& g = nullptr) {
    const auto& basis = a.basis();
    const bool split = ca.up.size() == ca.c.size() && cb.up.size() == cb.c.size();
    cplx acc = 0.0;
    for (std::size_t n = 0; n < ca.c.size(); ++n) {
        if constexpr (!std::is_same_v<std::decay_t<G>, std::nullptr_t>) {
            if (split && ca.lambda[n] < 0.0) {
                acc += g(std::sqrt(-ca.lambda[n]), ca.up[n], ca.um[n], cb.up[n], cb.um[n]);
                continue;
            }
        }
        acc += f(ca.lambda[n], ca.c[n], ca.d[n], cb.c[n], cb.d[n]);
    }
    for (std::size_t g = 0; g < basis.continuum.size(); ++g) {
        const auto& grid = basis.continuum[g];
        cplx part = 0.0;
        for (std::size_t j = 0; j < grid.count; ++j)
            part += f(grid.desc.lambda(grid.k(j)), ca.continuum[g].c[j], ca.continuum[g].d[j], cb.continuum[g].c[j],
                      cb.continuum[g].d[j]);
        acc += grid.dk * part;
    }
    return acc;
}

inline SpatialSet intersect(const SpatialSet& a, const SpatialSet& b) {
    SpatialSet out(std::max(a.components(), b.components()));
    for (int c = 0; c < std::min(a.components(), b.components()); ++c)
        for (const auto& x : a.intervals(c))
            for (const auto& y : b.intervals(c)) {
                const double lo = std::max(x.lo, y.lo);
                const double hi = std::min(x.hi, y.hi);
                if (hi > lo) out.add({lo, hi}, c);
            }
    return out;
}

}  // namespace detail

/// E(phi, phi')(t) = <phidot_t, phidot'_t> + <phi_t, A phi'_t>, from the
/// coefficients at time t. Not positive in general.
inline cplx energy(const Solution& a, const Solution& b, double t = 0.0) {
    detail::require_same_basis(a, b);
    return detail::pair_sum(a, a.coefficients_at(t), b.coefficients_at(t),
                            [](double lam, cplx c, cplx d, cplx c2, cplx d2) { return d * std::conj(d2) + lam * c * std::conj(c2); },
                            [](double, cplx up, cplx um, cplx up2, cplx um2) {
                                return 0.5 * (up * std::conj(um2) + um * std::conj(up2));
                            });
}

/// sigma(phi, phi')(t) = <phi_t, phidot'_t> - <phidot_t, phi'_t>.
inline cplx symplectic(const Solution& a, const Solution& b, double t = 0.0) {
    detail::require_same_basis(a, b);
    return detail::pair_sum(a, a.coefficients_at(t), b.coefficients_at(t),
                            [](double, cplx c, cplx d, cplx c2, cplx d2) { return c * std::conj(d2) - d * std::conj(c2); },
                            [](double kappa, cplx up, cplx um, cplx up2, cplx um2) {
                                return (up * std::conj(um2) - um * std::conj(up2)) / (2.0 * kappa);
                            });
}

/// Magnitude scale of E(a, b): the same sums with |lambda| and absolute values.
inline double energy_scale(const Solution& a, const Solution& b, double t = 0.0) {
    const auto ca = a.coefficients_at(t);
    const auto cb = b.coefficients_at(t);
    return detail::pair_sum(a, ca, cb, [](double lam, cplx c, cplx d, cplx c2, cplx d2) {
               return cplx(std::abs(d) * std::abs(d2) + std::abs(lam) * std::abs(c) * std::abs(c2));
           }).real();
}

inline double symplectic_scale(const Solution& a, const Solution& b, double t = 0.0) {
    const auto ca = a.coefficients_at(t);
    const auto cb = b.coefficients_at(t);
    return detail::pair_sum(a, ca, cb, [](double, cplx c, cplx d, cplx c2, cplx d2) {
               return cplx(std::abs(c) * std::abs(d2) + std::abs(d) * std::abs(c2));
           }).real();
}

/// Energy from position space: <phidot, phidot'> + <phi, -phi''' + mu phi'>
/// by quadrature, phi'' by a central difference of step h.
inline cplx energy_direct(const Solution& a, const Solution& b, double t, double h) {
    detail::require_same_basis(a, b);
    const auto& basis = a.basis();
    double mu = 0.0;
    (void)extensions::unshifted(basis.op.extension, mu);
    const auto dom = evolution::set_union(evolution::solution_domain(a, t), evolution::solution_domain(b, t));
    const auto rules = evolution::domain_rules(basis, dom);
    const auto ca = a.coefficients_at(t);
    const auto cb = b.coefficients_at(t);
    cplx acc = 0.0;
    for (int c = 0; c < static_cast<int>(rules.size()); ++c) {
        double cmu = 0.0;
        (void)extensions::unshifted(basis.op.component(c).extension, cmu);
        const auto& r = rules[c];
        for (std::size_t i = 0; i < r.size(); ++i) {
            const double x = r.nodes[i];
            auto f = [&](double y) { return evolution::reconstruct(basis, cb, Point(y, c), false); };
            const cplx a_phi = evolution::reconstruct(basis, ca, Point(x, c), false);
            const cplx a_dot = evolution::reconstruct(basis, ca, Point(x, c), true);
            const cplx b_dot = evolution::reconstruct(basis, cb, Point(x, c), true);
            const cplx fx = f(x);
            const cplx b_op = -(f(x + h) - 2.0 * fx + f(x - h)) / (h * h) + cmu * fx;
            acc += r.weights[i] * (a_dot * std::conj(b_dot) + a_phi * std::conj(b_op));
        }
    }
    return acc;
}

/// (T_t F)(s) = F(s - t).
inline Solution time_translate(const Solution& s, double t) { return s.advanced(-t); }

/// (P F)(s) = F(-s), the solution with data (phi0, -phidot0).
inline Solution time_reflect(const Solution& s) { return s.reflected(); }

/// Solution with data (-phidot0, phi0); sigma(psi, partner) = ||phi0||^2 + ||phidot0||^2.
inline Solution symplectic_partner(const Solution& s) {
    ModeCoefficients c = s.coefficients();
    const ModeCoefficients& o = s.coefficients();
    std::swap(c.c, c.d);
    for (auto& z : c.c) z = -z;
    // (-d, c) in characteristic form, linear in (up, um) without cancellation
    for (std::size_t n = 0; n < c.up.size(); ++n) {
        if (!(c.lambda[n] < 0.0)) continue;
        const double k = std::sqrt(-c.lambda[n]);
        const double p = 0.5 / k - 0.5 * k, q = 0.5 / k + 0.5 * k;
        c.up[n] = p * o.up[n] - q * o.um[n];
        c.um[n] = q * o.up[n] - p * o.um[n];
    }
    for (auto& g : c.continuum) {
        std::swap(g.c, g.d);
        for (auto& z : g.c) z = -z;
    }
    return Solution(s.basis_ptr(), std::move(c), s.support());
}

/// Fraction of ||phi_t||^2 outside the causal slice J(K) at time t, taken
/// against max(||phi_0||^2, ||phi_t||^2). `region` restricts where the
/// outside mass is collected. Half-lines are integrated up to
/// sup K + |t| + 5.
inline double leakage(const Solution& s, double t, const std::optional<SpatialSet>& region = std::nullopt) {
    const auto& basis = s.basis();
    const auto& m = basis.op.manifold;
    const SpatialSet& K = s.support();
    if (K.empty()) return 0.0;
    const SpatialSet slice = geometry::causal_slice(m, K, t).set;
    SpatialSet outside = geometry::complement(m, slice, K.sup() + std::abs(t) + 5.0);
    if (region) outside = detail::intersect(outside, *region);
    const auto ct = s.coefficients_at(t);
    double mass = 0.0;
    for (int c = 0; c < basis.op.components(); ++c) {
        double extent = 0.0;
        for (const auto& iv : outside.intervals(c)) extent = std::max(extent, iv.length());
        if (extent == 0.0) continue;
        const auto rule = evolution::detail::rule_on(outside, c, evolution::detail::panel_width(basis.k_max(c), 2 * extent));
        for (std::size_t i = 0; i < rule.size(); ++i)
            mass += rule.weights[i] * std::norm(evolution::reconstruct(basis, ct, Point(rule.nodes[i], c), false));
    }
    const double denom = std::max(s.norm2_phi(0.0), evolution::coefficient_norm2(basis, ct, false));
    return denom > 0.0 ? mass / denom : 0.0;
}

struct ConservedSeries {
    std::vector<double> times;
    std::vector<std::vector<cplx>> energy;      // [pair][time]
    std::vector<std::vector<cplx>> symplectic;  // [pair][time]
    std::vector<double> leakage;                // first solution of the first pair
    std::vector<double> phi_norm;               // ||phi_t|| of the same solution
    std::vector<double> energy_drift;           // per pair, max |E(t) - E(0)| / energy scale at 0
    std::vector<double> symplectic_drift;
};

/// Energy and symplectic values of each pair on a time grid, with drift
/// measured against the magnitude scale of the sums at t = 0.
inline ConservedSeries conserved_series(const std::vector<std::pair<Solution, Solution>>& pairs,
                                        const std::vector<double>& times, bool with_leakage = true) {
    ConservedSeries out;
    out.times = times;
    for (const auto& [a, b] : pairs) {
        std::vector<cplx> e, w;
        const double es = energy_scale(a, b);
        const double ws = symplectic_scale(a, b);
        double de = 0.0, dw = 0.0;
        for (double t : times) {
            e.push_back(energy(a, b, t));
            w.push_back(symplectic(a, b, t));
            de = std::max(de, std::abs(e.back() - e.front()));
            dw = std::max(dw, std::abs(w.back() - w.front()));
        }
        out.energy.push_back(std::move(e));
        out.symplectic.push_back(std::move(w));
        out.energy_drift.push_back(es > 0.0 ? de / es : de);
        out.symplectic_drift.push_back(ws > 0.0 ? dw / ws : dw);
    }
    if (!pairs.empty()) {
        const Solution& s = pairs.front().first;
        for (double t : times) {
            out.leakage.push_back(with_leakage ? leakage(s, t) : 0.0);
            out.phi_norm.push_back(std::sqrt(s.norm2_phi(t)));
        }
    }
    return out;
}

struct SymmetryDefects {
    double energy_translate = 0.0;
    double energy_reflect = 0.0;
    double symplectic_translate = 0.0;
    double symplectic_reflect = 0.0;

    double worst() const {
        return std::max({energy_translate, energy_reflect, symplectic_translate, symplectic_reflect});
    }
};

/// Relative defects of E(T_t a, T_t b) = E(a, b), E(P a, P b) = E(a, b),
/// sigma(T_t a, T_t b) = sigma(a, b), sigma(P a, P b) = -sigma(a, b) at each
/// sample time s.
inline SymmetryDefects symmetry_defects(const Solution& a, const Solution& b, double shift,
                                        const std::vector<double>& samples) {
    SymmetryDefects d;
    const Solution ta = time_translate(a, shift), tb = time_translate(b, shift);
    const Solution pa = time_reflect(a), pb = time_reflect(b);
    // Cauchy-Schwarz bounds from each solution alone; the pair sums vanish
    // identically for pairings such as (psi, psi*) with phidot0 = 0.
    auto norm2 = [](const Solution& u) {
        return evolution::coefficient_norm2(u.basis(), u.coefficients(), false) +
               evolution::coefficient_norm2(u.basis(), u.coefficients(), true);
    };
    const double es = std::max(std::sqrt(energy_scale(a, a) * energy_scale(b, b)), 1e-300);
    const double ws = std::max(std::sqrt(norm2(a) * norm2(b)), 1e-300);
    for (double s : samples) {
        const cplx e = energy(a, b, s);
        const cplx w = symplectic(a, b, s);
        d.energy_translate = std::max(d.energy_translate, std::abs(energy(ta, tb, s) - e) / es);
        d.energy_reflect = std::max(d.energy_reflect, std::abs(energy(pa, pb, s) - e) / es);
        d.symplectic_translate = std::max(d.symplectic_translate, std::abs(symplectic(ta, tb, s) - w) / ws);
        d.symplectic_reflect = std::max(d.symplectic_reflect, std::abs(symplectic(pa, pb, s) + w) / ws);
    }
    return d;
}

}  // namespace kgspec::observables
