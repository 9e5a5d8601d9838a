#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgspec {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double infinity = std::numeric_limits<double>::infinity();

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or preconditions.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A quadrature or root search that did not converge.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double lo, double hi)
        : Error(what + " on [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"),
          lo_(lo), hi_(hi) {}

    double lo() const { return lo_; }
    double hi() const { return hi_; }

private:
    double lo_;
    double hi_;
};

namespace numerics {

/// Nodes and weights of a composite quadrature rule.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }

    void append(const QuadratureRule& other) {
        nodes.insert(nodes.end(), other.nodes.begin(), other.nodes.end());
        weights.insert(weights.end(), other.weights.begin(), other.weights.end());
    }
};

inline constexpr unsigned gauss_order = 32;

namespace detail {

// 32-point Gauss-Legendre on [-1, 1], ascending.
inline const QuadratureRule& reference_rule() {
    static const QuadratureRule rule = [] {
        using G = boost::math::quadrature::gauss<double, gauss_order>;
        const auto& x = G::abscissa();
        const auto& w = G::weights();
        QuadratureRule r;
        for (std::size_t i = x.size(); i-- > 0;) {
            if (x[i] == 0.0) continue;
            r.nodes.push_back(-x[i]);
            r.weights.push_back(w[i]);
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            r.nodes.push_back(x[i]);
            r.weights.push_back(w[i]);
        }
        std::vector<std::size_t> order(r.nodes.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return r.nodes[a] < r.nodes[b]; });
        QuadratureRule sorted;
        for (auto i : order) {
            sorted.nodes.push_back(r.nodes[i]);
            sorted.weights.push_back(r.weights[i]);
        }
        return sorted;
    }();
    return rule;
}

}  // namespace detail

/// Composite Gauss-Legendre rule on [a, b] with `panels` equal panels.
inline QuadratureRule gauss_panels(double a, double b, std::size_t panels) {
    QuadratureRule out;
    if (!(b > a) || panels == 0) return out;
    const auto& ref = detail::reference_rule();
    out.nodes.reserve(panels * ref.size());
    out.weights.reserve(panels * ref.size());
    const double width = (b - a) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = a + width * static_cast<double>(p);
        const double half = 0.5 * width;
        const double mid = lo + half;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            out.nodes.push_back(mid + half * ref.nodes[i]);
            out.weights.push_back(half * ref.weights[i]);
        }
    }
    return out;
}

/// Composite rule on [a, b] with panels no wider than `max_panel_width`
/// and at least `min_panels` panels.
inline QuadratureRule gauss_composite(double a, double b, double max_panel_width,
                                      std::size_t min_panels = 1) {
    if (!(b > a)) return {};
    const auto needed = static_cast<std::size_t>(std::ceil((b - a) / max_panel_width - 1e-12));
    return gauss_panels(a, b, std::max({needed, min_panels, std::size_t{1}}));
}

template <class F>
auto integrate(F&& f, const QuadratureRule& rule) {
    using R = decltype(f(0.0));
    R acc{};
    for (std::size_t i = 0; i < rule.size(); ++i) acc += rule.weights[i] * f(rule.nodes[i]);
    return acc;
}

inline bool is_finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace numerics
}  // namespace kgspec
