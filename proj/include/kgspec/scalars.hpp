#pragma once

// C(t, x) = cos(sqrt(x) t) and S(t, x) = sin(sqrt(x) t) / sqrt(x), continued
// to x < 0 through cosh / sinh. Both are entire in x; near x t^2 = 0 a short
// Taylor series replaces the closed forms.

#include "kgspec/numerics.hpp"

#include <cmath>
#include <complex>
#include <string>

namespace kgspec {

/// Hyperbolic growth beyond double range; `magnitude()` is sqrt(-x)|t|.
class OverflowError : public Error {
public:
    explicit OverflowError(double magnitude)
        : Error("hyperbolic growth overflows: sqrt(-x)|t| = " + std::to_string(magnitude)),
          magnitude_(magnitude) {}

    double magnitude() const { return magnitude_; }

private:
    double magnitude_;
};

namespace scalars {

inline constexpr double series_threshold = 1e-4;
inline constexpr int series_terms = 6;
// log(DBL_MAX)
inline constexpr double overflow_exponent = 709.78;

/// sum_{n < terms} (-z)^n / (2n)!
template <class T>
T cos_series(T z, int terms = series_terms) {
    T term = 1.0;
    T sum = 1.0;
    for (int n = 1; n < terms; ++n) {
        term *= -z / static_cast<double>((2 * n - 1) * (2 * n));
        sum += term;
    }
    return sum;
}

/// sum_{n < terms} (-z)^n / (2n+1)!
template <class T>
T sin_series(T z, int terms = series_terms) {
    T term = 1.0;
    T sum = 1.0;
    for (int n = 1; n < terms; ++n) {
        term *= -z / static_cast<double>((2 * n) * (2 * n + 1));
        sum += term;
    }
    return sum;
}

}  // namespace scalars

namespace evolution {

inline double c_scalar(double t, double x) {
    const double z = x * t * t;
    if (std::abs(z) < scalars::series_threshold) return scalars::cos_series(z);
    if (x > 0.0) return std::cos(std::sqrt(x) * t);
    const double m = std::sqrt(-x) * std::abs(t);
    if (m > scalars::overflow_exponent) throw OverflowError(m);
    return std::cosh(m);
}

inline double s_scalar(double t, double x) {
    const double z = x * t * t;
    if (std::abs(z) < scalars::series_threshold) return t * scalars::sin_series(z);
    if (x > 0.0) {
        const double r = std::sqrt(x);
        return std::sin(r * t) / r;
    }
    const double r = std::sqrt(-x);
    const double m = r * std::abs(t);
    if (m > scalars::overflow_exponent) throw OverflowError(m);
    return std::sinh(r * t) / r;
}

/// d/dt S(t, x) = C(t, x); d/dt C(t, x) = -x S(t, x).
inline double c_scalar_dt(double t, double x) { return -x * s_scalar(t, x); }

}  // namespace evolution

namespace scalars {

/// cos(sqrt(lambda) x) for complex lambda; branch-free.
inline cplx cos_entire(double x, cplx lambda) {
    const cplx z = lambda * x * x;
    if (std::abs(z) < series_threshold) return cos_series(z);
    return std::cos(std::sqrt(lambda) * x);
}

/// sin(sqrt(lambda) x) / sqrt(lambda) for complex lambda; equals x at lambda = 0.
inline cplx sin_entire(double x, cplx lambda) {
    const cplx z = lambda * x * x;
    if (std::abs(z) < series_threshold) return x * sin_series(z);
    const cplx r = std::sqrt(lambda);
    return std::sin(r * x) / r;
}

}  // namespace scalars
}  // namespace kgspec
