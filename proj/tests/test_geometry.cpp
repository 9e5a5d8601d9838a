#include "kgspec/geometry.hpp"

#include <gtest/gtest.h>

using namespace kgspec;
using namespace kgspec::geometry;

TEST(Distance, CircleTakesShorterArc) {
    EXPECT_NEAR(distance(ManifoldSpec::circle(2 * pi), 0.0, 1.5 * pi), 0.5 * pi, 1e-15);
    EXPECT_NEAR(distance(ManifoldSpec::interval(1.0), 0.2, 0.9), 0.7, 1e-15);
    EXPECT_EQ(distance(ManifoldSpec::half_line(), 3.0, 3.0), 0.0);
}

TEST(Distance, DisjointComponentsAreInfinitelyFar) {
    auto m = ManifoldSpec::disjoint_half_lines(3);
    EXPECT_TRUE(std::isinf(distance(m, Point(1.0, 0), Point(1.0, 2))));
    EXPECT_EQ(distance(m, Point(1.0, 1), Point(2.5, 1)), 1.5);
}

TEST(ClosedNeighborhood, IntervalExamples) {
    auto m = ManifoldSpec::interval(1.0);
    auto K = SpatialSet::single(0.4, 0.6);
    auto n = closed_neighborhood(m, K, 0.2);
    ASSERT_EQ(n.set.intervals().size(), 1u);
    EXPECT_NEAR(n.set.intervals()[0].lo, 0.2, 1e-15);
    EXPECT_NEAR(n.set.intervals()[0].hi, 0.8, 1e-15);
    EXPECT_TRUE(n.compact);

    auto wide = closed_neighborhood(m, K, 0.5);
    EXPECT_FALSE(wide.compact);
    EXPECT_EQ(wide.set.intervals()[0].lo, 0.0);
    EXPECT_EQ(wide.set.intervals()[0].hi, 1.0);
}

TEST(ClosedNeighborhood, CircleDiameterCoversEverything) {
    auto m = ManifoldSpec::circle(2 * pi);
    auto n = closed_neighborhood(m, SpatialSet::single(1.0, 1.2), pi);
    EXPECT_TRUE(n.compact);
    EXPECT_NEAR(n.set.measure(), 2 * pi, 1e-12);
}

TEST(ClosedNeighborhood, CircleArcWrapsAtSeam) {
    auto m = ManifoldSpec::circle(2 * pi);
    auto n = closed_neighborhood(m, SpatialSet::single(0.1, 0.3), 0.5);
    ASSERT_EQ(n.set.intervals().size(), 2u);
    EXPECT_NEAR(n.set.intervals()[0].hi, 0.8, 1e-15);
    EXPECT_NEAR(n.set.intervals()[1].lo, 2 * pi - 0.4, 1e-15);
    EXPECT_NEAR(n.set.measure(), 1.2, 1e-14);
}

TEST(ClosedNeighborhood, MonotoneAndSemigroup) {
    auto m = ManifoldSpec::interval(3.0);
    auto K = SpatialSet::single(1.2, 1.5);
    K.add({1.9, 2.0});
    for (double s : {0.0, 0.1, 0.3}) {
        for (double t : {0.05, 0.2}) {
            auto a = closed_neighborhood(m, closed_neighborhood(m, K, s).set, t);
            auto b = closed_neighborhood(m, K, s + t);
            ASSERT_EQ(a.set.intervals().size(), b.set.intervals().size());
            for (std::size_t i = 0; i < a.set.intervals().size(); ++i) {
                EXPECT_NEAR(a.set.intervals()[i].lo, b.set.intervals()[i].lo, 1e-14);
                EXPECT_NEAR(a.set.intervals()[i].hi, b.set.intervals()[i].hi, 1e-14);
            }
            EXPECT_TRUE(closed_neighborhood(m, K, s + t).set.covers(closed_neighborhood(m, K, s).set));
        }
    }
}

TEST(CausalSlice, SymmetricInTime) {
    auto m = ManifoldSpec::half_line();
    auto K = SpatialSet::single(1.0, 2.0);
    auto s = causal_slice(m, K, -0.5);
    EXPECT_NEAR(s.set.intervals()[0].lo, 0.5, 1e-15);
    EXPECT_NEAR(s.set.intervals()[0].hi, 2.5, 1e-15);
    EXPECT_EQ(causal_slice(m, K, 0.7).set, causal_slice(m, K, -0.7).set);
    EXPECT_EQ(causal_slice(m, K, 0.0).set, K);
}

TEST(TInfinity, Catalog) {
    EXPECT_TRUE(std::isinf(t_infinity(ManifoldSpec::circle(2 * pi), SpatialSet::single(1.0, 2.0))));
    EXPECT_NEAR(t_infinity(ManifoldSpec::interval(1.0), SpatialSet::single(0.4, 0.6)), 0.4, 1e-15);
    EXPECT_NEAR(t_infinity(ManifoldSpec::interval(1.0), SpatialSet::single(0.5, 0.75)), 0.25, 1e-15);
    EXPECT_EQ(t_infinity(ManifoldSpec::half_line(), SpatialSet::single(1.0, 2.0)), 1.0);
}

TEST(TInfinity, BoundaryTouchingSupportIsRejected) {
    EXPECT_THROW(t_infinity(ManifoldSpec::interval(1.0), SpatialSet::single(0.0, 0.5)), InvalidArgument);
    EXPECT_THROW(t_infinity(ManifoldSpec::half_line(), SpatialSet::single(0.0, 0.5)), InvalidArgument);
}

TEST(TInfinity, MatchesLastCompactTime) {
    // bisect the compactness predicate of closed_neighborhood
    auto m = ManifoldSpec::interval(2.0);
    auto K = SpatialSet::single(0.7, 1.1);
    double lo = 0.0, hi = 5.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (closed_neighborhood(m, K, mid).compact ? lo : hi) = mid;
    }
    EXPECT_NEAR(t_infinity(m, K), lo, 1e-12);
}

TEST(Ladder, Values) {
    EXPECT_NEAR(t_ladder(0.4, 1), 0.2, 1e-16);
    EXPECT_NEAR(t_ladder(0.4, 3), 0.35, 1e-16);
    EXPECT_EQ(t_ladder(0.4, 0), 0.0);
    EXPECT_TRUE(std::isinf(t_ladder(infinity, 2)));
    double prev = -1.0;
    for (int n = 0; n < 40; ++n) {
        const double t = t_ladder(0.4, n);
        EXPECT_GT(t, prev);
        EXPECT_LT(t, 0.4);
        prev = t;
    }
    EXPECT_NEAR(t_ladder(0.4, 52), 0.4, 1e-15);
}

TEST(CauchyDevelopment, Examples) {
    auto m = ManifoldSpec::interval(1.0);
    EXPECT_TRUE(in_cauchy_development(m, 0.2, 0.5));
    EXPECT_FALSE(in_cauchy_development(m, 0.6, 0.5));
    EXPECT_EQ(in_cauchy_development(m, -0.45, 0.5), in_cauchy_development(m, 0.45, 0.5));
    EXPECT_TRUE(in_cauchy_development(ManifoldSpec::circle(1.0), 100.0, 0.3));
}

TEST(Complement, CutsUnboundedEnd) {
    auto m = ManifoldSpec::half_line();
    auto c = complement(m, SpatialSet::single(1.0, 2.0), 10.0);
    ASSERT_EQ(c.intervals().size(), 2u);
    EXPECT_EQ(c.intervals()[0].lo, 0.0);
    EXPECT_EQ(c.intervals()[0].hi, 1.0);
    EXPECT_EQ(c.intervals()[1].lo, 2.0);
    EXPECT_EQ(c.intervals()[1].hi, 10.0);
}

TEST(SpatialSet, MergesOverlaps) {
    SpatialSet s;
    s.add({0.5, 0.7});
    s.add({0.1, 0.2});
    s.add({0.6, 0.9});
    ASSERT_EQ(s.intervals().size(), 2u);
    EXPECT_EQ(s.intervals()[1].lo, 0.5);
    EXPECT_EQ(s.intervals()[1].hi, 0.9);
    EXPECT_TRUE(s.contains(0.15));
    EXPECT_FALSE(s.contains(0.3));
}
