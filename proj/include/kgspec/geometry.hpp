#pragma once

// Metric geometry of the one-dimensional base manifolds and the causal
// calculus of the ultrastatic spacetime R x Sigma (lapse V = 1): metric
// neighbourhoods, causal slices J(K) on a time slice, the compactness
// horizon t_infinity(K) and its dyadic ladder.

#include "kgspec/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace kgspec::geometry {

enum class ManifoldKind { circle, half_line, interval, disjoint_half_lines };

/// Base manifold Sigma. Coordinates: [0, L) on the circle, (0, inf) on a
/// half-line, (0, a) on an interval.
struct ManifoldSpec {
    ManifoldKind kind = ManifoldKind::interval;
    double length = 1.0;  // circumference L or interval length a
    int count = 1;        // number of half-lines for disjoint unions

    static ManifoldSpec circle(double circumference) {
        if (!(circumference > 0.0)) throw InvalidArgument("circle circumference must be positive");
        return {ManifoldKind::circle, circumference, 1};
    }
    static ManifoldSpec half_line() { return {ManifoldKind::half_line, infinity, 1}; }
    static ManifoldSpec interval(double a) {
        if (!(a > 0.0)) throw InvalidArgument("interval length must be positive");
        return {ManifoldKind::interval, a, 1};
    }
    static ManifoldSpec disjoint_half_lines(int n) {
        if (n < 1) throw InvalidArgument("disjoint union needs at least one half-line");
        return {ManifoldKind::disjoint_half_lines, infinity, n};
    }

    int components() const { return kind == ManifoldKind::disjoint_half_lines ? count : 1; }
    bool is_half_line_like() const {
        return kind == ManifoldKind::half_line || kind == ManifoldKind::disjoint_half_lines;
    }
    double lower() const { return 0.0; }
    double upper() const { return is_half_line_like() ? infinity : length; }
    /// The circle is complete; every other catalog manifold has an open edge at 0.
    bool complete() const { return kind == ManifoldKind::circle; }

    bool operator==(const ManifoldSpec&) const = default;
};

inline std::string to_string(ManifoldKind k) {
    switch (k) {
        case ManifoldKind::circle: return "circle";
        case ManifoldKind::half_line: return "half_line";
        case ManifoldKind::interval: return "interval";
        case ManifoldKind::disjoint_half_lines: return "disjoint_half_lines";
    }
    return "unknown";
}

/// A point of Sigma; `component` selects the half-line of a disjoint union.
struct Point {
    double x = 0.0;
    int component = 0;

    Point() = default;
    Point(double x_, int component_ = 0) : x(x_), component(component_) {}  // NOLINT(implicit)

    bool operator==(const Point&) const = default;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double length() const { return hi - lo; }
    bool contains(double x) const { return lo <= x && x <= hi; }
    bool operator==(const Interval&) const = default;
};

/// Finite union of closed intervals, one sorted disjoint list per component.
/// Circle arcs crossing the seam are stored split at 0 / L.
class SpatialSet {
public:
    SpatialSet() = default;
    explicit SpatialSet(int components) : parts_(static_cast<std::size_t>(std::max(components, 1))) {}

    static SpatialSet single(double lo, double hi, int component = 0, int components = 1) {
        SpatialSet s(std::max(components, component + 1));
        s.add(Interval{lo, hi}, component);
        return s;
    }

    void add(Interval iv, int component = 0) {
        if (iv.hi < iv.lo) throw InvalidArgument("interval with hi < lo");
        if (component < 0) throw InvalidArgument("negative component index");
        if (static_cast<std::size_t>(component) >= parts_.size()) parts_.resize(component + 1);
        parts_[component].push_back(iv);
        normalize(parts_[component]);
    }

    int components() const { return static_cast<int>(parts_.size()); }
    const std::vector<Interval>& intervals(int component = 0) const {
        static const std::vector<Interval> empty;
        return static_cast<std::size_t>(component) < parts_.size() ? parts_[component] : empty;
    }
    bool empty() const {
        return std::all_of(parts_.begin(), parts_.end(), [](const auto& p) { return p.empty(); });
    }
    bool contains(Point p) const {
        const auto& ivs = intervals(p.component);
        return std::any_of(ivs.begin(), ivs.end(), [&](const Interval& iv) { return iv.contains(p.x); });
    }
    double measure() const {
        double m = 0.0;
        for (const auto& p : parts_)
            for (const auto& iv : p) m += iv.length();
        return m;
    }
    /// Largest coordinate in the set (over all components).
    double sup() const {
        double s = -infinity;
        for (const auto& p : parts_)
            if (!p.empty()) s = std::max(s, p.back().hi);
        return s;
    }
    double inf() const {
        double s = infinity;
        for (const auto& p : parts_)
            if (!p.empty()) s = std::min(s, p.front().lo);
        return s;
    }
    /// true when `other` is contained in this set up to `slack`.
    bool covers(const SpatialSet& other, double slack = 0.0) const {
        for (int c = 0; c < other.components(); ++c) {
            for (const auto& iv : other.intervals(c)) {
                const auto& mine = intervals(c);
                bool ok = std::any_of(mine.begin(), mine.end(), [&](const Interval& m) {
                    return m.lo - slack <= iv.lo && iv.hi <= m.hi + slack;
                });
                if (!ok) return false;
            }
        }
        return true;
    }

    bool operator==(const SpatialSet& other) const {
        const int n = std::max(components(), other.components());
        for (int c = 0; c < n; ++c)
            if (intervals(c) != other.intervals(c)) return false;
        return true;
    }

private:
    static void normalize(std::vector<Interval>& ivs) {
        std::sort(ivs.begin(), ivs.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
        std::vector<Interval> merged;
        for (const auto& iv : ivs) {
            if (!merged.empty() && iv.lo <= merged.back().hi)
                merged.back().hi = std::max(merged.back().hi, iv.hi);
            else
                merged.push_back(iv);
        }
        ivs = std::move(merged);
    }

    std::vector<std::vector<Interval>> parts_{1};
};

/// Path distance of the flat metric. Points on different components of a
/// disjoint union are at infinite distance.
inline double distance(const ManifoldSpec& m, Point p, Point q) {
    if (p.component != q.component) return infinity;
    const double d = std::abs(p.x - q.x);
    if (m.kind == ManifoldKind::circle) {
        const double r = std::fmod(d, m.length);
        return std::min(r, m.length - r);
    }
    return d;
}

/// Checks that every interval of K lies in the open manifold.
inline void require_interior(const ManifoldSpec& m, const SpatialSet& K) {
    if (K.components() > m.components() && !K.intervals(K.components() - 1).empty())
        throw InvalidArgument("set refers to a component the manifold does not have");
    for (int c = 0; c < K.components(); ++c) {
        for (const auto& iv : K.intervals(c)) {
            switch (m.kind) {
                case ManifoldKind::circle:
                    if (iv.lo < 0.0 || iv.hi > m.length)
                        throw InvalidArgument("circle arc outside [0, L]");
                    break;
                case ManifoldKind::interval:
                    if (!(iv.lo > 0.0 && iv.hi < m.length))
                        throw InvalidArgument("support must lie strictly inside (0, a)");
                    break;
                default:
                    if (!(iv.lo > 0.0)) throw InvalidArgument("support must lie strictly inside (0, inf)");
                    break;
            }
        }
    }
}

struct Neighborhood {
    SpatialSet set;
    bool compact = true;  // compact as a subset of the open manifold
};

/// C(K, t) = { p : d(p, K) <= t }, clipped to the closure of Sigma.
inline Neighborhood closed_neighborhood(const ManifoldSpec& m, const SpatialSet& K, double t) {
    if (t < 0.0) throw InvalidArgument("closed_neighborhood needs t >= 0");
    Neighborhood out{SpatialSet(std::max(K.components(), m.components())), true};
    for (int c = 0; c < K.components(); ++c) {
        for (const auto& iv : K.intervals(c)) {
            const double lo = iv.lo - t;
            const double hi = iv.hi + t;
            if (m.kind == ManifoldKind::circle) {
                const double L = m.length;
                if (hi - lo >= L) {
                    out.set.add({0.0, L}, c);
                    continue;
                }
                const double shift = std::floor(lo / L) * L;
                const double a = lo - shift;
                const double b = hi - shift;
                if (b <= L) {
                    out.set.add({a, b}, c);
                } else {
                    out.set.add({a, L}, c);
                    out.set.add({0.0, b - L}, c);
                }
                continue;
            }
            if (!(lo > 0.0)) out.compact = false;
            if (m.kind == ManifoldKind::interval && !(hi < m.length)) out.compact = false;
            out.set.add({std::max(lo, 0.0), m.kind == ManifoldKind::interval ? std::min(hi, m.length) : hi}, c);
        }
    }
    return out;
}

/// J(K) intersected with the slice at time t, as a subset of Sigma. Equal
/// to C(K, |t|) whenever that set is compact; otherwise the clipped
/// neighbourhood is returned with `compact == false`.
inline Neighborhood causal_slice(const ManifoldSpec& m, const SpatialSet& K, double t) {
    return closed_neighborhood(m, K, std::abs(t));
}

/// sup{ t >= 0 : J+(K) on the slice t is compact }.
inline double t_infinity(const ManifoldSpec& m, const SpatialSet& K) {
    require_interior(m, K);
    if (m.complete()) return infinity;
    double t = infinity;
    for (int c = 0; c < K.components(); ++c) {
        for (const auto& iv : K.intervals(c)) {
            t = std::min(t, iv.lo);
            if (m.kind == ManifoldKind::interval) t = std::min(t, m.length - iv.hi);
        }
    }
    return t;
}

/// t_n(K) = (1 - 2^-n) t_infinity(K). Infinite horizon gives +inf for n >= 1.
inline double t_ladder(double t_inf, int n) {
    if (n < 0) throw InvalidArgument("ladder index must be non-negative");
    if (n == 0) return 0.0;
    if (std::isinf(t_inf)) return infinity;
    return (1.0 - std::ldexp(1.0, -n)) * t_inf;
}

inline double t_ladder(const ManifoldSpec& m, const SpatialSet& K, int n) {
    return t_ladder(t_infinity(m, K), n);
}

struct CausalWindow {
    double t_inf = infinity;

    double ladder(int n) const { return t_ladder(t_inf, n); }
    bool finite() const { return std::isfinite(t_inf); }
};

inline CausalWindow causal_window(const ManifoldSpec& m, const SpatialSet& K) {
    return CausalWindow{t_infinity(m, K)};
}

/// (t, x) lies in the Cauchy development of the slice t = 0 iff the closed
/// ball of radius |t| about x is compact in Sigma.
inline bool in_cauchy_development(const ManifoldSpec& m, double t, Point x) {
    if (m.complete()) return true;
    SpatialSet p(m.components());
    p.add({x.x, x.x}, x.component);
    return closed_neighborhood(m, p, std::abs(t)).compact;
}

/// Complement of S inside Sigma; unbounded ends are cut at `far`.
inline SpatialSet complement(const ManifoldSpec& m, const SpatialSet& S, double far = infinity) {
    SpatialSet out(m.components());
    for (int c = 0; c < m.components(); ++c) {
        const double lo = 0.0;
        const double hi = m.is_half_line_like() ? far : m.length;
        double cursor = lo;
        for (const auto& iv : S.intervals(c)) {
            if (iv.lo > cursor) out.add({cursor, std::min(iv.lo, hi)}, c);
            cursor = std::max(cursor, iv.hi);
            if (cursor >= hi) break;
        }
        if (cursor < hi) out.add({cursor, hi}, c);
    }
    return out;
}

}  // namespace kgspec::geometry
