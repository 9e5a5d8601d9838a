#pragma once

// Semiboundedness of a catalog operator from its computed spectrum. Finite
// direct sums are always bounded below; an unbounded infinite sum is
// recognized from the trend of the component infima over the truncation.

#include "kgspec/spectral.hpp"

#include <string>
#include <vector>

namespace kgspec::extensions {

enum class Classification { positive, bounded_below, acceptable_unbounded_below };

inline std::string to_string(Classification c) {
    switch (c) {
        case Classification::positive:
            return "positive";
        case Classification::bounded_below:
            return "bounded_below";
        case Classification::acceptable_unbounded_below:
            return "acceptable_unbounded_below";
    }
    return "unknown";
}

/// Lowest point of the spectrum of a single-component operator (eigenvalue
/// or bottom of the continuum).
inline double spectrum_infimum(const Operator& op) {
    double mu = 0.0;
    const ExtensionSpec& e = unshifted(op.extension, mu);
    if (e.holds<DirectSum>()) throw InvalidArgument("spectrum_infimum takes one component");
    double inf = infinity;
    if (e.holds<HalfLineRobin>()) inf = mu;
    const auto lowest = spectral::find_eigenvalues(op, -infinity, infinity, 1);
    if (!lowest.empty()) inf = std::min(inf, lowest.front().lambda);
    return inf;
}

struct ClassifyReport {
    Classification kind = Classification::bounded_below;
    double infimum = 0.0;                  // of the (truncated) operator
    std::vector<double> component_infima;  // one entry per summand
    bool unbounded_trend = false;
};

/// Tolerance below zero still counted as a nonnegative spectrum.
inline constexpr double positivity_slack = 1e-12;

/// True when the last three component infima are negative, strictly
/// decreasing, with non-shrinking decrements, and the last is the overall
/// minimum. A sequence settling to a finite limit has shrinking steps.
inline bool unbounded_trend(const std::vector<double>& m) {
    const std::size_t n = m.size();
    if (n < 3) return false;
    const double a = m[n - 3], b = m[n - 2], c = m[n - 1];
    if (!(c < 0.0 && c < b && b < a)) return false;
    if (b - c < a - b) return false;
    return *std::min_element(m.begin(), m.end()) == c;
}

inline ClassifyReport classify_report(const Operator& op) {
    ClassifyReport r;
    for (int c = 0; c < op.components(); ++c) r.component_infima.push_back(spectrum_infimum(op.component(c)));
    double mu = 0.0;
    const bool sum = unshifted(op.extension, mu).holds<DirectSum>();
    r.infimum = *std::min_element(r.component_infima.begin(), r.component_infima.end());
    r.unbounded_trend = sum && unbounded_trend(r.component_infima);
    if (r.unbounded_trend)
        r.kind = Classification::acceptable_unbounded_below;
    else if (r.infimum >= -positivity_slack)
        r.kind = Classification::positive;
    else
        r.kind = Classification::bounded_below;
    return r;
}

inline Classification classify(const Operator& op) { return classify_report(op).kind; }

}  // namespace kgspec::extensions
