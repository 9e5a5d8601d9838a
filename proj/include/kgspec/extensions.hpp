#pragma once

// Catalog of self-adjoint realizations of -d^2/dx^2 on the 1D manifolds:
// boundary conditions as linear maps on the boundary trace, canonical
// forms, mass shifts and finite direct sums.

#include "kgspec/geometry.hpp"
#include "kgspec/numerics.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace kgspec::extensions {

using geometry::ManifoldKind;
using geometry::ManifoldSpec;

/// Unique closure of -d^2/dx^2 on the circle.
struct CircleClosure {
    bool operator==(const CircleClosure&) const = default;
};

/// cos(alpha) phi(0) = sin(alpha) phi'(0), alpha in (-pi/2, pi/2].
struct HalfLineRobin {
    double alpha = 0.0;
    bool operator==(const HalfLineRobin&) const = default;
};

/// phi(0) = phi(a) = 0.
struct IntervalDirichlet {
    bool operator==(const IntervalDirichlet&) const = default;
};

/// (phi'(0), -phi'(a)) = theta (phi(0), phi(a)) with theta Hermitian.
struct IntervalFirstKind {
    double theta11 = 0.0;
    double theta22 = 0.0;
    cplx theta12 = 0.0;
    bool operator==(const IntervalFirstKind&) const = default;
};

/// (phi(0), phi(a)) parallel to w and w^* (phi'(0), -phi'(a)) = theta w^* (phi(0), phi(a)).
struct IntervalSecondKind {
    cplx w1 = 1.0;
    cplx w2 = 0.0;
    double theta = 0.0;
    bool operator==(const IntervalSecondKind&) const = default;
};

class ExtensionSpec;

/// A + mu with mu = m^2 >= 0.
struct MassShift {
    std::shared_ptr<const ExtensionSpec> inner;
    double mu = 0.0;
    bool operator==(const MassShift& o) const;
};

/// Finite truncation of a direct sum over copies of the base manifold.
struct DirectSum {
    std::vector<ExtensionSpec> components;
    bool operator==(const DirectSum& o) const;
};

class ExtensionSpec {
public:
    using Variant = std::variant<CircleClosure, HalfLineRobin, IntervalDirichlet, IntervalFirstKind,
                                 IntervalSecondKind, MassShift, DirectSum>;

    ExtensionSpec() = default;
    template <class T>
    ExtensionSpec(T alt) : v_(std::move(alt)) {}  // NOLINT(implicit)

    const Variant& variant() const { return v_; }
    template <class T>
    bool holds() const { return std::holds_alternative<T>(v_); }
    template <class T>
    const T& as() const { return std::get<T>(v_); }

    bool operator==(const ExtensionSpec& o) const { return v_ == o.v_; }

private:
    Variant v_ = IntervalDirichlet{};
};

inline bool MassShift::operator==(const MassShift& o) const {
    return mu == o.mu && ((!inner && !o.inner) || (inner && o.inner && *inner == *o.inner));
}
inline bool DirectSum::operator==(const DirectSum& o) const { return components == o.components; }

inline ExtensionSpec mass_shift(ExtensionSpec inner, double mu) {
    return MassShift{std::make_shared<const ExtensionSpec>(std::move(inner)), mu};
}

inline std::string kind_name(const ExtensionSpec& s) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, CircleClosure>) return "circle_closure";
            else if constexpr (std::is_same_v<T, HalfLineRobin>) return "half_line_robin";
            else if constexpr (std::is_same_v<T, IntervalDirichlet>) return "interval_dirichlet";
            else if constexpr (std::is_same_v<T, IntervalFirstKind>) return "first_kind";
            else if constexpr (std::is_same_v<T, IntervalSecondKind>) return "second_kind";
            else if constexpr (std::is_same_v<T, MassShift>) return "mass_shift";
            else return "direct_sum";
        },
        s.variant());
}

/// Strips mass shifts, returning the innermost spec and the accumulated shift.
inline const ExtensionSpec& unshifted(const ExtensionSpec& s, double& mu) {
    const ExtensionSpec* cur = &s;
    while (cur->holds<MassShift>()) {
        const auto& ms = cur->as<MassShift>();
        if (!ms.inner) throw InvalidArgument("mass shift without inner extension");
        mu += ms.mu;
        cur = ms.inner.get();
    }
    return *cur;
}

/// Boundary values (phi(0), phi(a)) and inward derivatives (phi'(0), -phi'(a)).
/// Half-line traces only use the first entry of each pair.
struct BoundaryTrace {
    cplx value0 = 0.0;
    cplx value_a = 0.0;
    cplx inward0 = 0.0;
    cplx inward_a = 0.0;
};

/// Zero iff the trace satisfies the boundary conditions. Circle: empty.
inline std::vector<cplx> boundary_residual(const ExtensionSpec& spec, const BoundaryTrace& tr) {
    double mu = 0.0;
    const auto& s = unshifted(spec, mu);
    if (s.holds<CircleClosure>()) return {};
    if (s.holds<HalfLineRobin>()) {
        const double a = s.as<HalfLineRobin>().alpha;
        return {std::cos(a) * tr.value0 - std::sin(a) * tr.inward0};
    }
    if (s.holds<IntervalDirichlet>()) return {tr.value0, tr.value_a};
    if (s.holds<IntervalFirstKind>()) {
        const auto& f = s.as<IntervalFirstKind>();
        // theta11 phi(0) - phi'(0) + theta12 phi(a); conj(theta12) phi(0) + theta22 phi(a) + phi'(a)
        return {f.theta11 * tr.value0 - tr.inward0 + f.theta12 * tr.value_a,
                std::conj(f.theta12) * tr.value0 + f.theta22 * tr.value_a - tr.inward_a};
    }
    if (s.holds<IntervalSecondKind>()) {
        const auto& k = s.as<IntervalSecondKind>();
        return {k.w2 * tr.value0 - k.w1 * tr.value_a,
                std::conj(k.w1) * (k.theta * tr.value0 - tr.inward0) +
                    std::conj(k.w2) * (k.theta * tr.value_a - tr.inward_a)};
    }
    throw InvalidArgument("boundary_residual is defined per component of a direct sum");
}

/// Fixes the representative of a second-kind extension: |w| = 1 and the first
/// nonzero component real positive. Recurses through shifts and sums.
inline ExtensionSpec canonicalize(const ExtensionSpec& spec) {
    if (spec.holds<IntervalSecondKind>()) {
        auto k = spec.as<IntervalSecondKind>();
        const double n = std::sqrt(std::norm(k.w1) + std::norm(k.w2));
        if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("second-kind extension needs (w1, w2) != 0");
        const cplx lead = std::abs(k.w1) > 0.0 ? k.w1 : k.w2;
        const cplx phase = std::conj(lead) / std::abs(lead);
        k.w1 = k.w1 * phase / n;
        k.w2 = k.w2 * phase / n;
        if (std::abs(k.w1) > 0.0) k.w1 = std::abs(k.w1);
        else k.w2 = std::abs(k.w2);
        return k;
    }
    if (spec.holds<MassShift>()) {
        const auto& ms = spec.as<MassShift>();
        return mass_shift(canonicalize(*ms.inner), ms.mu);
    }
    if (spec.holds<DirectSum>()) {
        DirectSum out;
        for (const auto& c : spec.as<DirectSum>().components) out.components.push_back(canonicalize(c));
        return out;
    }
    return spec;
}

/// Validates parameter ranges and the pairing with a base manifold.
inline void validate(const ManifoldSpec& m, const ExtensionSpec& spec) {
    if (spec.holds<MassShift>()) {
        const auto& ms = spec.as<MassShift>();
        if (!ms.inner) throw InvalidArgument("mass shift without inner extension");
        if (!(ms.mu >= 0.0) || !std::isfinite(ms.mu)) throw InvalidArgument("mass shift mu must be finite and >= 0");
        validate(m, *ms.inner);
        return;
    }
    if (spec.holds<DirectSum>()) {
        const auto& ds = spec.as<DirectSum>();
        if (m.kind != ManifoldKind::disjoint_half_lines)
            throw InvalidArgument("direct sums live on a disjoint union of half-lines");
        if (static_cast<int>(ds.components.size()) != m.count)
            throw InvalidArgument("direct sum needs one component per half-line");
        for (const auto& c : ds.components) {
            if (c.holds<DirectSum>()) throw InvalidArgument("nested direct sums are not supported");
            validate(ManifoldSpec::half_line(), c);
        }
        return;
    }
    if (spec.holds<CircleClosure>()) {
        if (m.kind != ManifoldKind::circle) throw InvalidArgument("circle closure needs a circle");
        return;
    }
    if (spec.holds<HalfLineRobin>()) {
        if (m.kind != ManifoldKind::half_line) throw InvalidArgument("Robin extension needs a half-line");
        const double a = spec.as<HalfLineRobin>().alpha;
        if (!(a > -pi / 2 && a <= pi / 2)) throw InvalidArgument("alpha must lie in (-pi/2, pi/2]");
        return;
    }
    if (m.kind != ManifoldKind::interval) throw InvalidArgument(kind_name(spec) + " needs an interval");
    if (spec.holds<IntervalFirstKind>()) {
        const auto& f = spec.as<IntervalFirstKind>();
        if (!std::isfinite(f.theta11) || !std::isfinite(f.theta22) || !numerics::is_finite(f.theta12))
            throw InvalidArgument("theta entries must be finite");
    }
    if (spec.holds<IntervalSecondKind>()) {
        const auto& k = spec.as<IntervalSecondKind>();
        const double n = std::norm(k.w1) + std::norm(k.w2);
        if (!(n > 0.0)) throw InvalidArgument("second-kind extension needs (w1, w2) != 0");
        if (std::abs(n - 1.0) > 1e-12) throw InvalidArgument("(w1, w2) must be a unit vector; canonicalize first");
        if (!std::isfinite(k.theta)) throw InvalidArgument("theta must be finite");
    }
}

/// Manifold plus extension: the self-adjoint operator generating the dynamics.
struct Operator {
    ManifoldSpec manifold;
    ExtensionSpec extension;

    Operator(ManifoldSpec m, ExtensionSpec e) : manifold(m), extension(canonicalize(e)) {
        validate(manifold, extension);
    }

    /// Component operator on the n-th half-line of a direct sum (identity otherwise).
    Operator component(int n) const {
        double mu = 0.0;
        const auto& base = unshifted(extension, mu);
        if (!base.holds<DirectSum>()) return *this;
        const auto& comps = base.as<DirectSum>().components;
        ExtensionSpec c = comps.at(static_cast<std::size_t>(n));
        if (mu != 0.0) c = mass_shift(c, mu);
        return Operator(ManifoldSpec::half_line(), c);
    }
    int components() const { return manifold.components(); }
};

/// Mass shift A -> A + mu: eigenvalues move by +mu, resolvent arguments by -mu.
struct MassShiftMap {
    double mu = 0.0;

    double eigenvalue(double lambda) const { return lambda + mu; }
    cplx resolvent_argument(cplx lambda) const { return lambda - mu; }
    bool identity() const { return mu == 0.0; }
};

inline MassShiftMap mass_shift_spectrum(const ExtensionSpec& spec, double mu) {
    if (!(mu >= 0.0)) throw InvalidArgument("mass shift mu must be >= 0");
    double inner_mu = 0.0;
    (void)unshifted(spec, inner_mu);
    return MassShiftMap{mu};
}

}  // namespace kgspec::extensions
