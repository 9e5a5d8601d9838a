#pragma once

// Finite-difference reference solver for phi_tt = -(A + mu) phi: explicit
// leapfrog on a node grid that includes the endpoints, boundary conditions
// through centered ghost values. Shares no code path with the spectral
// solver beyond the data profiles and the half-line truncation.

#include "kgspec/evolution.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace kgspec::fd {

using evolution::CauchyData;
using evolution::FieldState;
using evolution::Profile;
using evolution::Solution;
using extensions::ExtensionSpec;
using extensions::ManifoldKind;
using extensions::ManifoldSpec;
using extensions::Operator;
using geometry::Point;
using geometry::SpatialSet;

inline constexpr double max_courant = 0.9;

struct FDGrid {
    double h = 1.0 / 512;
    double k = 0.9 / 512;

    double courant() const { return k / h; }

    /// Largest step k <= courant * h that divides `interval` evenly.
    static FDGrid fit(double h, double interval, double courant = max_courant) {
        if (!(h > 0.0)) throw InvalidArgument("grid spacing must be positive");
        if (!(interval > 0.0)) return FDGrid{h, courant * h};
        const double n = std::ceil(interval / (courant * h) - 1e-9);
        return FDGrid{h, interval / n};
    }
};

namespace detail {

enum class Closure { periodic, dirichlet, first_kind, second_kind };

/// One bounded component: nodes x_j = j h, j = 0..n (n - 1 on the circle).
struct Stepper {
    Closure closure = Closure::dirichlet;
    int component = 0;
    double length = 1.0;
    double h = 1.0;
    int n = 1;
    double mu = 0.0;
    double theta11 = 0.0, theta22 = 0.0;
    cplx theta12 = 0.0;
    cplx w1 = 1.0, w2 = 0.0;
    double theta = 0.0;

    int size() const { return closure == Closure::periodic ? n : n + 1; }
    double x(int j) const { return j * h; }

    double weight(int j) const {
        if (closure == Closure::periodic) return h;
        return (j == 0 || j == n) ? 0.5 * h : h;
    }

    /// out = -(A + mu) u on the grid.
    void apply(const std::vector<cplx>& u, std::vector<cplx>& out) const {
        const double ih2 = 1.0 / (h * h);
        const int m = size();
        out.resize(m);
        if (closure == Closure::periodic) {
            for (int j = 0; j < m; ++j) {
                const cplx l = u[(j + m - 1) % m], r = u[(j + 1) % m];
                out[j] = (l - 2.0 * u[j] + r) * ih2 - mu * u[j];
            }
            return;
        }
        for (int j = 1; j < n; ++j) out[j] = (u[j - 1] - 2.0 * u[j] + u[j + 1]) * ih2 - mu * u[j];
        const cplx r0 = 2.0 * (u[1] - u[0]) * ih2;
        const cplx rn = 2.0 * (u[n - 1] - u[n]) * ih2;
        switch (closure) {
            case Closure::dirichlet:
                out[0] = out[n] = 0.0;
                break;
            case Closure::first_kind: {
                // ghost u_{-1} = u_1 - 2h phi'(0), u_{n+1} = u_{n-1} - 2h (-phi'(a))
                const cplx g0 = theta11 * u[0] + theta12 * u[n];
                const cplx gn = std::conj(theta12) * u[0] + theta22 * u[n];
                out[0] = r0 - 2.0 * g0 / h - mu * u[0];
                out[n] = rn - 2.0 * gn / h - mu * u[n];
                break;
            }
            case Closure::second_kind: {
                // boundary pair confined to span(w); w^* (inward derivatives) = theta s
                const cplx s = std::conj(w1) * u[0] + std::conj(w2) * u[n];
                const cplx acc = std::conj(w1) * r0 + std::conj(w2) * rn - 2.0 * theta * s / h - mu * s;
                out[0] = w1 * acc;
                out[n] = w2 * acc;
                break;
            }
            case Closure::periodic:
                break;
        }
    }

    /// Gershgorin bound on |A + mu| for the grid operator.
    double spectral_bound() const {
        const double ih2 = 1.0 / (h * h);
        double b = 4.0 * ih2 + std::abs(mu);
        if (closure == Closure::first_kind)
            b = std::max(b, 4.0 * ih2 + 2.0 * (std::max(std::abs(theta11), std::abs(theta22)) + std::abs(theta12)) / h +
                                std::abs(mu));
        if (closure == Closure::second_kind) b = std::max(b, 4.0 * ih2 + 2.0 * std::abs(theta) / h + std::abs(mu));
        return b;
    }

    void project_boundary(std::vector<cplx>& u) const {
        if (closure == Closure::dirichlet) {
            u[0] = u[n] = 0.0;
        } else if (closure == Closure::second_kind) {
            const cplx s = std::conj(w1) * u[0] + std::conj(w2) * u[n];
            u[0] = w1 * s;
            u[n] = w2 * s;
        }
    }
};

inline Stepper make_stepper(const Operator& op, int component, double h) {
    Stepper st;
    st.component = component;
    const ExtensionSpec& e = extensions::unshifted(op.extension, st.mu);
    st.length = op.manifold.length;
    st.n = std::max(2, static_cast<int>(std::floor(st.length / h + 1e-9)));
    st.h = st.length / st.n;
    if (e.holds<extensions::CircleClosure>()) {
        st.closure = Closure::periodic;
    } else if (e.holds<extensions::IntervalDirichlet>()) {
        st.closure = Closure::dirichlet;
    } else if (e.holds<extensions::IntervalFirstKind>()) {
        const auto& f = e.as<extensions::IntervalFirstKind>();
        st.closure = Closure::first_kind;
        st.theta11 = f.theta11;
        st.theta22 = f.theta22;
        st.theta12 = f.theta12;
    } else if (e.holds<extensions::IntervalSecondKind>()) {
        const auto& s = e.as<extensions::IntervalSecondKind>();
        st.closure = Closure::second_kind;
        st.w1 = s.w1;
        st.w2 = s.w2;
        st.theta = s.theta;
    } else {
        throw InvalidArgument("finite differences need a bounded component, got " + extensions::kind_name(e));
    }
    return st;
}

/// Bounded stand-in for a half-line component, its length rounded up to a
/// multiple of h.
inline Operator bounded_component(const Operator& op, const SpatialSet& K, double t_max, double h) {
    if (!op.manifold.is_half_line_like()) return op;
    const Operator tr = evolution::truncated_operator(op, K, t_max);
    const double L = std::ceil(tr.manifold.length / h - 1e-9) * h;
    return Operator(ManifoldSpec::interval(L), tr.extension);
}

}  // namespace detail

/// Output of a run: snapshots plus the quadrature weights of the grid
/// (trapezoid on intervals, uniform on the circle) in the same node order.
struct FDRun {
    FDGrid grid;
    std::vector<FieldState> states;
    std::vector<double> weights;
    std::vector<Operator> domains;  // bounded operator actually discretized, per component
};

/// Leapfrog solution at t = i * t_final / snapshots, i = 0..snapshots.
/// t_final / snapshots must be a multiple of grid.k (see FDGrid::fit);
/// negative t_final runs backwards.
inline FDRun fd_evolve(const Operator& op, const CauchyData& data, double t_final, const FDGrid& grid,
                       int snapshots = 1) {
    if (!(grid.h > 0.0) || !(grid.k > 0.0)) throw InvalidArgument("grid spacing and time step must be positive");
    if (grid.courant() > max_courant + 1e-12)
        throw InvalidArgument("Courant ratio k/h = " + std::to_string(grid.courant()) + " exceeds 0.9");
    if (snapshots < 1) throw InvalidArgument("need at least one snapshot");
    const double dir = t_final < 0.0 ? -1.0 : 1.0;
    const double span = std::abs(t_final) / snapshots;
    const long per = span > 0.0 ? std::lround(span / grid.k) : 0;
    if (span > 0.0 && std::abs(per * grid.k - span) > 1e-9 * span)
        throw InvalidArgument("snapshot spacing is not a multiple of the time step");

    const SpatialSet K = data.support();
    std::vector<detail::Stepper> steppers;
    FDRun run;
    run.grid = grid;
    for (int c = 0; c < op.components(); ++c) {
        const Operator dom = detail::bounded_component(op.component(c), K, std::abs(t_final), grid.h);
        auto st = detail::make_stepper(dom, c, grid.h);
        if (grid.k * grid.k * st.spectral_bound() > 4.0)
            throw InvalidArgument("time step unstable for the boundary parameters (k^2 |A| > 4)");
        steppers.push_back(st);
        run.domains.push_back(dom);
        for (int j = 0; j < st.size(); ++j) run.weights.push_back(st.weight(j));
    }

    std::vector<Point> nodes;
    for (const auto& st : steppers)
        for (int j = 0; j < st.size(); ++j) nodes.emplace_back(st.x(j), st.component);

    const double k = grid.k;
    std::vector<std::vector<cplx>> prev(steppers.size()), cur(steppers.size()), next(steppers.size()), lap(steppers.size());
    for (std::size_t s = 0; s < steppers.size(); ++s) {
        const auto& st = steppers[s];
        const int m = st.size();
        std::vector<cplx> u(m), v(m);
        for (int j = 0; j < m; ++j) {
            const Point p(st.x(j), st.component);
            u[j] = data.phi0.empty() ? cplx(0.0) : data.phi0(p);
            v[j] = data.phidot0.empty() ? cplx(0.0) : dir * data.phidot0(p);
        }
        st.project_boundary(u);
        st.project_boundary(v);
        prev[s] = u;
        st.apply(u, lap[s]);
        cur[s].resize(m);
        for (int j = 0; j < m; ++j) cur[s][j] = u[j] + k * v[j] + 0.5 * k * k * lap[s][j];
        st.project_boundary(cur[s]);
    }
    // prev = u^0, cur = u^1

    auto emit = [&](double t, const std::vector<std::vector<cplx>>& um1, const std::vector<std::vector<cplx>>& u,
                    const std::vector<std::vector<cplx>>& up1, const CauchyData* initial) {
        FieldState fs;
        fs.t = dir * t;
        fs.grid = nodes;
        for (std::size_t s = 0; s < steppers.size(); ++s) {
            const auto& st = steppers[s];
            for (int j = 0; j < st.size(); ++j) {
                fs.phi.push_back(u[s][j]);
                if (initial) {
                    const Point p(st.x(j), st.component);
                    fs.phidot.push_back(initial->phidot0.empty() ? cplx(0.0) : initial->phidot0(p));
                } else {
                    fs.phidot.push_back(dir * (up1[s][j] - um1[s][j]) / (2.0 * k));
                }
            }
        }
        if (initial) {
            // phidot0 projected like the evolved values
            std::size_t off = 0;
            for (const auto& st : steppers) {
                std::vector<cplx> v(fs.phidot.begin() + off, fs.phidot.begin() + off + st.size());
                st.project_boundary(v);
                std::copy(v.begin(), v.end(), fs.phidot.begin() + off);
                off += st.size();
            }
        }
        run.states.push_back(std::move(fs));
    };
    emit(0.0, prev, prev, cur, &data);

    const long total = per * snapshots;
    for (long step = 1; step <= total; ++step) {
        // advance: prev = u^{step-1}, cur = u^step -> next = u^{step+1}
        for (std::size_t s = 0; s < steppers.size(); ++s) {
            const auto& st = steppers[s];
            st.apply(cur[s], lap[s]);
            next[s].resize(cur[s].size());
            for (std::size_t j = 0; j < cur[s].size(); ++j)
                next[s][j] = 2.0 * cur[s][j] - prev[s][j] + k * k * lap[s][j];
            st.project_boundary(next[s]);
        }
        if (step % per == 0) emit(step * k, prev, cur, next, nullptr);
        std::swap(prev, cur);
        std::swap(cur, next);
    }
    return run;
}

/// Single snapshot at time t with spacing h and the largest stable step.
inline FDRun fd_state(const Operator& op, const CauchyData& data, double t, double h) {
    return fd_evolve(op, data, t, FDGrid::fit(h, std::abs(t)), 1);
}

/// Weighted L2 norm squared of phi (or phidot) over the nodes, optionally
/// restricted to `region`.
inline double fd_norm2(const FDRun& run, const FieldState& s, bool phidot = false,
                       const std::optional<SpatialSet>& region = std::nullopt) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.grid.size(); ++i) {
        if (region && !region->contains(s.grid[i])) continue;
        acc += run.weights[i] * std::norm(phidot ? s.phidot[i] : s.phi[i]);
    }
    return acc;
}

/// Mass of phi_t inside `region` against max(||phi_0||^2, ||phi_t||^2),
/// the grid analog of observables::leakage restricted to a region.
inline double fd_leakage(const FDRun& run, const FieldState& s, const SpatialSet& region) {
    const double denom = std::max(fd_norm2(run, run.states.front()), fd_norm2(run, s));
    return denom > 0.0 ? fd_norm2(run, s, false, region) / denom : 0.0;
}

/// Discrete energy sum w |phidot|^2 + <phi, (A + mu) phi>_w.
inline double fd_energy(const FDRun& run, const FieldState& s) {
    double acc = 0.0;
    std::size_t off = 0;
    for (std::size_t c = 0; c < run.domains.size(); ++c) {
        const auto st = detail::make_stepper(run.domains[c], static_cast<int>(c), run.grid.h);
        std::vector<cplx> u(s.phi.begin() + off, s.phi.begin() + off + st.size()), au;
        st.apply(u, au);
        for (int j = 0; j < st.size(); ++j)
            acc += run.weights[off + j] * (std::norm(s.phidot[off + j]) - (u[j] * std::conj(au[j])).real());
        off += st.size();
    }
    return acc;
}

/// Boundary trace of one component from one-sided second-order differences.
inline extensions::BoundaryTrace fd_trace(const FDRun& run, const FieldState& s, int component = 0) {
    std::size_t off = 0;
    for (int c = 0; c < component; ++c) off += detail::make_stepper(run.domains[c], c, run.grid.h).size();
    const auto st = detail::make_stepper(run.domains[component], component, run.grid.h);
    const cplx* u = s.phi.data() + off;
    const int n = st.n;
    extensions::BoundaryTrace tr;
    tr.value0 = u[0];
    tr.value_a = u[n];
    tr.inward0 = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * st.h);
    tr.inward_a = (-3.0 * u[n] + 4.0 * u[n - 1] - u[n - 2]) / (2.0 * st.h);
    return tr;
}

/// ||phi_fd - phi_spec||_w / max(||phi_0||, ||phi_t||) at the snapshot time,
/// the spectral solution evaluated at the FD nodes.
inline double spectral_difference(const FDRun& run, const FieldState& s, const Solution& spec) {
    double diff = 0.0;
    for (std::size_t i = 0; i < s.grid.size(); ++i)
        diff += run.weights[i] * std::norm(s.phi[i] - spec.phi(s.t, s.grid[i]));
    const double denom = std::max(spec.norm2_phi(0.0), spec.norm2_phi(s.t));
    return denom > 0.0 ? std::sqrt(diff / denom) : std::sqrt(diff);
}

/// Spectral truncation for FD comparisons: the default Parseval tolerance
/// leaves pointwise errors near 1e-4 of the data norm on bump data.
inline evolution::EvolveOptions reference_options() {
    evolution::EvolveOptions o;
    o.parseval_tol = 1e-14;
    o.max_modes = 1024;
    return o;
}

struct ConvergenceReport {
    std::vector<double> h;
    std::vector<double> error;
    double order = 0.0;  // least-squares slope of log error against log h
    bool exact = false;  // every error vanished
};

/// FD errors against the spectral solution at time t over a sequence of
/// spacings, with the observed order.
inline ConvergenceReport convergence_order(const Operator& op, const CauchyData& data, double t,
                                           const std::vector<double>& hs,
                                           const evolution::EvolveOptions& o = reference_options()) {
    if (hs.size() < 2) throw InvalidArgument("convergence order needs at least two spacings");
    const Solution spec = evolution::solve(op, data, o);
    ConvergenceReport r;
    for (double h : hs) {
        const FDRun run = fd_state(op, data, t, h);
        r.h.push_back(run.grid.h);
        r.error.push_back(spectral_difference(run, run.states.back(), spec));
    }
    r.exact = std::all_of(r.error.begin(), r.error.end(), [](double e) { return e == 0.0; });
    if (r.exact) {
        r.order = infinity;
        return r;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(hs.size());
    for (std::size_t i = 0; i < hs.size(); ++i) {
        const double x = std::log(r.h[i]), y = std::log(r.error[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    r.order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return r;
}

}  // namespace kgspec::fd
