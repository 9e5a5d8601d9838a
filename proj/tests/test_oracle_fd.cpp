#include "kgspec/oracle_fd.hpp"
#include "kgspec/observables.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace kgspec;
using namespace kgspec::evolution;
using namespace kgspec::extensions;
using namespace kgspec::fd;

namespace {

CauchyData bump_data(const ManifoldSpec& m, double c, double w, double cd = -1.0, double wd = 0.0) {
    CauchyData d;
    d.phi0 = make_bump(m, c, w);
    if (cd >= 0.0) d.phidot0 = make_bump(m, cd, wd, cplx(0.3, -0.5));
    return d;
}

double max_abs_error(const FieldState& s, const std::function<cplx(double)>& exact) {
    double e = 0.0;
    for (std::size_t i = 0; i < s.grid.size(); ++i) e = std::max(e, std::abs(s.phi[i] - exact(s.grid[i].x)));
    return e;
}

}  // namespace

TEST(FDGridTest, FitAndCourantGuard) {
    auto g = FDGrid::fit(0.01, 1.0);
    EXPECT_LE(g.courant(), 0.9);
    EXPECT_NEAR(std::round(1.0 / g.k) * g.k, 1.0, 1e-12);
    Operator op(ManifoldSpec::interval(1.0), IntervalDirichlet{});
    auto d = bump_data(op.manifold, 0.5, 0.1);
    EXPECT_THROW(fd_evolve(op, d, 0.5, FDGrid{0.01, 0.0095}), InvalidArgument);
    EXPECT_THROW(fd_evolve(op, d, 0.5, FDGrid{0.01, 0.0031}), InvalidArgument);  // 0.5 not a multiple of k
    // Robin parameter so large that the boundary rows break the step bound
    Operator stiff(ManifoldSpec::interval(1.0), IntervalFirstKind{400.0, 0.0, 0.0});
    EXPECT_THROW(fd_evolve(stiff, d, 0.45, FDGrid{0.01, 0.009}), InvalidArgument);
}

TEST(FDEvolve, DirichletSeparatedSolution) {
    Operator op(ManifoldSpec::interval(pi), IntervalDirichlet{});
    CauchyData d;
    d.phi0 = Profile([](geometry::Point p) { return cplx(std::sin(p.x)); }, SpatialSet::single(0.0, pi), 1.0);
    const double t = 2.0;
    auto exact = [t](double x) { return cplx(std::cos(t) * std::sin(x)); };
    const double e1 = max_abs_error(fd_state(op, d, t, pi / 64).states.back(), exact);
    const double e2 = max_abs_error(fd_state(op, d, t, pi / 128).states.back(), exact);
    EXPECT_LT(e1, 1e-3);
    EXPECT_NEAR(e1 / e2, 4.0, 0.4);
}

TEST(FDEvolve, ZeroDataStaysZero) {
    Operator op(ManifoldSpec::interval(1.0), IntervalFirstKind{-2.0, 0.5, cplx(0.4, -1.1)});
    auto run = fd_evolve(op, CauchyData{}, 1.0, FDGrid::fit(1.0 / 64, 0.25), 4);
    ASSERT_EQ(run.states.size(), 5u);
    for (const auto& s : run.states)
        for (std::size_t i = 0; i < s.phi.size(); ++i) {
            EXPECT_EQ(s.phi[i], cplx(0.0));
            EXPECT_EQ(s.phidot[i], cplx(0.0));
        }
}

TEST(FDEvolve, InteriorDiamondMatchesDAlembert) {
    Operator op(ManifoldSpec::interval(1.0), IntervalFirstKind{0.0, 0.0, 1.0});
    auto d = bump_data(op.manifold, 0.5, 0.15);
    const double t = 0.3;
    auto exact = [t](double x) { return cplx(0.5 * (oracle::bump(x - t, 0.5, 0.15) + oracle::bump(x + t, 0.5, 0.15))); };
    auto inner = [&](const FDRun& run) {
        const auto& s = run.states.back();
        double e = 0.0;
        for (std::size_t i = 0; i < s.grid.size(); ++i) {
            const double x = s.grid[i].x;
            if (x > t && x < 1.0 - t) e = std::max(e, std::abs(s.phi[i] - exact(x)));
        }
        return e;
    };
    const double e1 = inner(fd_state(op, d, t, 1.0 / 256));
    const double e2 = inner(fd_state(op, d, t, 1.0 / 512));
    EXPECT_LT(e2, 1e-3);
    EXPECT_NEAR(e1 / e2, 4.0, 0.6);
}

TEST(FDEvolve, BoundaryResidualShrinksQuadratically) {
    const double r = 1 / std::sqrt(2.0);
    std::vector<Operator> ops = {
        Operator(ManifoldSpec::interval(1.0), IntervalFirstKind{-2.0, 0.5, cplx(0.4, -1.1)}),
        Operator(ManifoldSpec::interval(1.0), IntervalSecondKind{r, r, 0.0}),
        Operator(ManifoldSpec::interval(1.0), IntervalSecondKind{0.6, cplx(0.0, 0.8), -1.5}),
    };
    for (const auto& op : ops) {
        auto d = bump_data(op.manifold, 0.4, 0.2, 0.6, 0.15);
        auto residual = [&](double h) {
            auto run = fd_state(op, d, 0.9, h);
            double m = 0.0;
            for (cplx z : boundary_residual(op.extension, fd_trace(run, run.states.back()))) m = std::max(m, std::abs(z));
            return m;
        };
        const double r1 = residual(1.0 / 128), r2 = residual(1.0 / 256);
        EXPECT_LT(r2, 1e-2) << kind_name(op.extension);
        EXPECT_GT(r1 / r2, 3.0) << kind_name(op.extension);
    }
}

TEST(FDEvolve, DiscreteEnergyDrift) {
    Operator op(ManifoldSpec::interval(1.0), IntervalFirstKind{0.7, 0.2, cplx(0.3, 0.5)});
    auto d = bump_data(op.manifold, 0.4, 0.2, 0.6, 0.15);
    auto drift = [&](double h) {
        auto run = fd_evolve(op, d, 4.0, FDGrid::fit(h, 0.5), 8);
        const double e0 = fd_energy(run, run.states.front());
        double m = 0.0;
        for (const auto& s : run.states) m = std::max(m, std::abs(fd_energy(run, s) - e0) / std::abs(e0));
        return m;
    };
    const double d1 = drift(1.0 / 128), d2 = drift(1.0 / 256);
    EXPECT_LT(d2, 2e-3);
    EXPECT_GT(d1 / d2, 3.0);
}

TEST(FDEvolve, BackwardRunMatchesSpectral) {
    Operator op(ManifoldSpec::interval(1.0), IntervalSecondKind{0.6, cplx(0.0, 0.8), -1.5});
    auto d = bump_data(op.manifold, 0.4, 0.2, 0.6, 0.15);
    auto spec = solve(op, d, reference_options());
    auto run = fd_state(op, d, -0.8, 1.0 / 512);
    EXPECT_DOUBLE_EQ(run.states.back().t, -0.8);
    EXPECT_LT(spectral_difference(run, run.states.back(), spec), 1e-3);
}

TEST(Convergence, DirichletModeIsSecondOrder) {
    Operator op(ManifoldSpec::interval(pi), IntervalDirichlet{});
    CauchyData d;
    d.phi0 = mode_profile(op.manifold, spectral::eigenfunction(op, 4.0));
    EvolveOptions o;
    o.modes = 4;
    auto r = convergence_order(op, d, 1.5, {pi / 64, pi / 128, pi / 256}, o);
    EXPECT_NEAR(r.order, 2.0, 0.1);
}

TEST(Convergence, ZeroDataIsExact) {
    Operator op(ManifoldSpec::interval(1.0), IntervalDirichlet{});
    auto r = convergence_order(op, CauchyData{}, 1.0, {1.0 / 64, 1.0 / 128});
    EXPECT_TRUE(r.exact);
}

// t = 0.8 rather than the interval length: at t = a the dispersion errors of
// the two reflected halves cancel and the observed order rises above 2.
TEST(Convergence, CatalogSpecsAgreeWithSpectral) {
    const double r = 1 / std::sqrt(2.0);
    struct Case {
        Operator op;
        double c;
    };
    std::vector<Case> cases = {
        {Operator(ManifoldSpec::interval(1.0), IntervalDirichlet{}), 0.5},
        {Operator(ManifoldSpec::interval(1.0), IntervalFirstKind{}), 0.5},
        {Operator(ManifoldSpec::interval(1.0), IntervalFirstKind{0.0, 0.0, 1.0}), 0.5},
        {Operator(ManifoldSpec::interval(1.0), IntervalFirstKind{-2.0, 0.5, cplx(0.4, -1.1)}), 0.5},
        {Operator(ManifoldSpec::interval(1.0), IntervalSecondKind{r, r, 0.0}), 0.5},
        {Operator(ManifoldSpec::interval(1.0), IntervalSecondKind{0.6, cplx(0.0, 0.8), -1.5}), 0.5},
        {Operator(ManifoldSpec::circle(1.0), mass_shift(CircleClosure{}, 2.0)), 0.5},
        {Operator(ManifoldSpec::half_line(), HalfLineRobin{-pi / 4}), 1.0},
        {Operator(ManifoldSpec::half_line(), HalfLineRobin{0.5}), 1.0},
    };
    for (const auto& cs : cases) {
        auto d = bump_data(cs.op.manifold, cs.c, 0.2, cs.c + 0.1, 0.15);
        auto rep = convergence_order(cs.op, d, 0.8, {1.0 / 128, 1.0 / 256, 1.0 / 512});
        EXPECT_LT(rep.error.back(), 1e-3) << kind_name(cs.op.extension);
        EXPECT_NEAR(rep.order, 2.0, 0.3) << kind_name(cs.op.extension);
    }
}

TEST(Convergence, DirectSumComponentwise) {
    Operator op(ManifoldSpec::disjoint_half_lines(2), DirectSum{{HalfLineRobin{-0.5}, HalfLineRobin{-1.0 / 3}}});
    CauchyData d;
    d.phi0 = make_bump(op.manifold, 1.0, 0.3, 1.0, 0) + make_bump(op.manifold, 0.8, 0.2, cplx(0.0, 1.0), 1);
    auto spec = solve(op, d, reference_options());
    auto run = fd_state(op, d, 0.7, 1.0 / 256);
    ASSERT_EQ(run.domains.size(), 2u);
    EXPECT_LT(spectral_difference(run, run.states.back(), spec), 1e-3);
}

TEST(Leakage, CoupledEndpointsAgreeWithSpectral) {
    Operator op(ManifoldSpec::interval(1.0), IntervalFirstKind{0.0, 0.0, 1.0});
    CauchyData d;
    d.phi0 = make_bump(op.manifold, 0.72, 0.03);
    d.phidot0 = make_bump_derivative(op.manifold, 0.72, 0.03, -1.0);
    EvolveOptions o;
    o.modes = 1024;
    auto spec = solve(op, d, o);
    const SpatialSet near0 = SpatialSet::single(0.0, 0.25);
    for (double t : {0.32, 0.4}) {
        auto run = fd_state(op, d, t, 1.0 / 512);
        const double lf = fd_leakage(run, run.states.back(), near0);
        const double ls = observables::leakage(spec, t, near0);
        EXPECT_GT(lf, 1e-3);
        EXPECT_LT(std::max(lf / ls, ls / lf), 2.0) << t << " " << lf << " " << ls;
    }
}
