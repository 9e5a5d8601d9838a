#include "kgspec/observables.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace kgspec;
using namespace kgspec::evolution;
using namespace kgspec::extensions;
using namespace kgspec::observables;

namespace {

Operator dirichlet_pi() { return Operator(ManifoldSpec::interval(pi), IntervalDirichlet{}); }

CauchyData mode_data(const Operator& op, double lambda, bool velocity = false) {
    CauchyData d;
    auto p = mode_profile(op.manifold, spectral::eigenfunction(op, lambda));
    (velocity ? d.phidot0 : d.phi0) = p;
    return d;
}

CauchyData bumps(const ManifoldSpec& m, double c, double w, cplx a, double cd, double wd, cplx ad) {
    CauchyData d;
    d.phi0 = make_bump(m, c, w, a);
    if (wd > 0.0) d.phidot0 = make_bump(m, cd, wd, ad);
    return d;
}

}  // namespace

TEST(Energy, SingleModesAndZero) {
    auto op = dirichlet_pi();
    auto d = mode_data(op, 1.0);
    EvolveOptions o;
    o.modes = 10;
    auto s = solve(op, d, o);
    EXPECT_NEAR(std::abs(energy(s, s) - 1.0), 0.0, 1e-13);
    auto z = solve(s.basis_ptr(), CauchyData{});
    EXPECT_EQ(energy(z, z), cplx(0.0));

    Operator robin(ManifoldSpec::half_line(), HalfLineRobin{-pi / 4});
    auto r = solve(robin, mode_data(robin, -1.0));
    EXPECT_NEAR(std::abs(energy(r, r) + 1.0), 0.0, 1e-12);
}

TEST(Energy, MatchesPositionSpaceForm) {
    auto op = Operator(ManifoldSpec::interval(1.0), IntervalFirstKind{-2.0, 0.5, cplx(0.4, -1.1)});
    auto d = bumps(op.manifold, 0.4, 0.2, 1.0, 0.6, 0.15, cplx(0.3, -0.5));
    auto s = solve(op, d);
    const cplx e = energy(s, s, 0.3);
    const cplx e1 = energy_direct(s, s, 0.3, 2e-3);
    const cplx e2 = energy_direct(s, s, 0.3, 1e-3);
    EXPECT_LT(std::abs(e2 - e), 1e-4 * std::abs(e));
    EXPECT_NEAR(std::abs(e1 - e) / std::abs(e2 - e), 4.0, 0.3);
}

TEST(Energy, PositiveForDirichlet) {
    auto op = Operator(ManifoldSpec::interval(1.0), IntervalDirichlet{});
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 5; ++i) {
        auto d = bumps(op.manifold, 0.5 + 0.2 * u(rng), 0.2, cplx(u(rng), u(rng)), 0.5, 0.3, cplx(u(rng), u(rng)));
        auto s = solve(op, d);
        EXPECT_GT(energy(s, s).real(), 0.0);
        EXPECT_LT(std::abs(energy(s, s).imag()), 1e-14);
    }
}

TEST(Symplectic, BasicValues) {
    auto op = dirichlet_pi();
    EvolveOptions o;
    o.modes = 10;
    auto a = mode_data(op, 1.0);
    auto b = mode_data(op, 1.0, true);
    auto basis = make_basis(op, {&a, &b}, o);
    auto sa = solve(basis, a), sb = solve(basis, b);
    EXPECT_NEAR(std::abs(symplectic(sa, sb) - 1.0), 0.0, 1e-13);
    auto bump = bumps(op.manifold, 1.3, 0.6, 1.0, 0.0, 0.0, 0.0);
    auto sr = solve(op, bump);
    EXPECT_LT(std::abs(symplectic(sr, sr)), 1e-15);
}

TEST(Symplectic, NondegeneracyPairing) {
    auto op = Operator(ManifoldSpec::interval(1.0), IntervalSecondKind{0.6, cplx(0.0, 0.8), -1.5});
    auto d = bumps(op.manifold, 0.4, 0.2, cplx(1.0, 0.5), 0.6, 0.15, cplx(0.3, -0.5));
    auto s = solve(op, d);
    const double n0 = std::norm(cplx(1.0, 0.5)) *
                      oracle::simpson([](double x) { return std::pow(oracle::bump(x, 0.4, 0.2), 2); }, 0.2, 0.6, 20000);
    const double n1 = std::norm(cplx(0.3, -0.5)) *
                      oracle::simpson([](double x) { return std::pow(oracle::bump(x, 0.6, 0.15), 2); }, 0.45, 0.75, 20000);
    const cplx w = symplectic(s, symplectic_partner(s), 1.3);
    EXPECT_NEAR(w.real(), n0 + n1, 1e-8 * (n0 + n1));
    EXPECT_LT(std::abs(w.imag()), 1e-12);
}

TEST(Forms, BilinearityAndSymmetry) {
    auto op = Operator(ManifoldSpec::circle(1.0), mass_shift(CircleClosure{}, 0.5));
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto rnd = [&] {
        return bumps(op.manifold, 0.5 + 0.3 * u(rng), 0.15, cplx(u(rng), u(rng)), 0.5 + 0.3 * u(rng), 0.1,
                     cplx(u(rng), u(rng)));
    };
    auto d1 = rnd(), d2 = rnd(), d3 = rnd();
    const cplx a(0.4, -0.9), b(1.1, 0.3);
    CauchyData mix;
    mix.phi0 = a * d1.phi0 + b * d2.phi0;
    mix.phidot0 = a * d1.phidot0 + b * d2.phidot0;
    EvolveOptions o;
    o.modes = 301;
    auto basis = make_basis(op, {&d1, &d2, &d3}, o);
    auto s1 = solve(basis, d1), s2 = solve(basis, d2), s3 = solve(basis, d3), sm = solve(basis, mix);
    const double t = 0.77;
    EXPECT_LT(std::abs(energy(sm, s3, t) - (a * energy(s1, s3, t) + b * energy(s2, s3, t))), 1e-12);
    EXPECT_LT(std::abs(symplectic(sm, s3, t) - (a * symplectic(s1, s3, t) + b * symplectic(s2, s3, t))), 1e-12);
    EXPECT_LT(std::abs(energy(s1, s2, t) - std::conj(energy(s2, s1, t))), 1e-12);
    EXPECT_LT(std::abs(symplectic(s1, s2, t) + std::conj(symplectic(s2, s1, t))), 1e-12);
}

TEST(Symmetries, TranslateAndReflect) {
    auto op = Operator(ManifoldSpec::interval(1.0), IntervalFirstKind{0.0, 0.0, 1.0});
    auto d = bumps(op.manifold, 0.45, 0.2, 1.0, 0.6, 0.15, cplx(0.3, -0.5));
    auto s = solve(op, d);
    auto rr = time_reflect(time_reflect(s));
    auto back = time_translate(time_translate(s, 0.37), -0.37);
    auto shifted = time_translate(s, 0.37);
    for (double t : {0.0, 0.4, 1.3})
        for (double x : {0.2, 0.55, 0.9}) {
            EXPECT_LT(std::abs(rr.phi(t, x) - s.phi(t, x)), 1e-12);
            EXPECT_LT(std::abs(back.phi(t, x) - s.phi(t, x)), 1e-12);
            EXPECT_LT(std::abs(shifted.phi(t, x) - s.phi(t - 0.37, x)), 1e-12);
            EXPECT_LT(std::abs(time_reflect(s).phi(t, x) - s.phi(-t, x)), 1e-12);
        }
    auto even = solve(op, bumps(op.manifold, 0.45, 0.2, 1.0, 0.0, 0.0, 0.0));
    for (double t : {0.3, 0.9})
        for (double x : {0.2, 0.55}) EXPECT_LT(std::abs(time_reflect(even).phi(t, x) - even.phi(t, x)), 1e-10);
}

TEST(Symmetries, FormLaws) {
    auto op = Operator(ManifoldSpec::interval(1.0), IntervalFirstKind{-2.0, 0.5, cplx(0.4, -1.1)});
    auto d1 = bumps(op.manifold, 0.45, 0.2, 1.0, 0.6, 0.15, cplx(0.3, -0.5));
    auto d2 = bumps(op.manifold, 0.3, 0.1, cplx(0.0, 1.0), 0.7, 0.2, 2.0);
    auto basis = make_basis(op, {&d1, &d2});
    auto a = solve(basis, d1), b = solve(basis, d2);
    std::vector<double> times;
    for (int i = 0; i < 10; ++i) times.push_back(0.2 * i);
    EXPECT_LT(symmetry_defects(a, b, 1.7, times).worst(), 1e-8);
}

TEST(ConservedSeriesTest, SingleModeAndBump) {
    auto op = dirichlet_pi();
    EvolveOptions o;
    o.modes = 5;
    auto m = solve(op, mode_data(op, 4.0), o);
    std::vector<double> times;
    for (int i = 0; i <= 20; ++i) times.push_back(0.5 * i);
    auto cs = conserved_series({{m, m}}, times, false);
    EXPECT_LT(cs.energy_drift[0], 1e-12);

    auto b = solve(op, bumps(op.manifold, 1.3, 0.6, 1.0, 2.0, 0.4, cplx(0.0, 0.7)));
    auto cb = conserved_series({{b, b}, {b, symplectic_partner(b)}}, times, false);
    EXPECT_LT(cb.energy_drift[0], 1e-8);
    EXPECT_LT(cb.symplectic_drift[1], 1e-8);
    EXPECT_EQ(cb.times.size(), cb.phi_norm.size());
}

TEST(ConservedSeriesTest, BoundStateEnergyConstantWhileNormGrows) {
    Operator op(ManifoldSpec::half_line(), HalfLineRobin{-pi / 4});
    auto s = solve(op, mode_data(op, -1.0));
    std::vector<double> times = {0.0, 1.0, 2.0, 4.0};
    auto cs = conserved_series({{s, s}}, times, false);
    EXPECT_LT(cs.energy_drift[0], 1e-12);
    EXPECT_GT(cs.phi_norm.back(), 20 * cs.phi_norm.front());
    for (auto e : cs.energy[0]) EXPECT_NEAR(e.real(), -1.0, 1e-9);
}

TEST(Leakage, ZeroAtStartAndInsideHorizon) {
    auto op = Operator(ManifoldSpec::interval(1.0), IntervalDirichlet{});
    CauchyData d;
    d.phi0 = make_bump(op.manifold, 0.5, 0.1);
    auto s = solve(op, d);
    EXPECT_LT(leakage(s, 0.0), 1e-6);
    const double h = 1.0 / 512;
    for (double t : {0.1, 0.25, 0.4 - 2 * h}) EXPECT_LT(leakage(s, t), 1e-6) << t;
    EXPECT_LT(leakage(s, -0.3), 1e-6);
}

TEST(Leakage, BoundaryCouplingLeaksNearOrigin) {
    auto op = Operator(ManifoldSpec::interval(1.0), IntervalFirstKind{0.0, 0.0, 1.0});
    CauchyData d;
    d.phi0 = make_bump(op.manifold, 0.72, 0.03);
    d.phidot0 = make_bump_derivative(op.manifold, 0.72, 0.03, -1.0);
    EvolveOptions o;
    o.modes = 1024;
    auto s = solve(op, d, o);
    const SpatialSet near0 = SpatialSet::single(0.0, 0.25);
    for (double t : {0.31, 0.38, 0.44}) EXPECT_GT(leakage(s, t, near0), 1e-3) << t;
    EXPECT_LT(leakage(s, 0.2), 1e-8);
}

TEST(Leakage, DirectSumAndCircle) {
    Operator circ(ManifoldSpec::circle(1.0), CircleClosure{});
    CauchyData d;
    d.phi0 = make_bump(circ.manifold, 0.5, 0.1);
    auto s = solve(circ, d);
    EXPECT_LT(leakage(s, 0.3), 1e-6);
    // the slice covers the circle once |t| >= 0.4
    EXPECT_EQ(leakage(s, 0.45), 0.0);
}
