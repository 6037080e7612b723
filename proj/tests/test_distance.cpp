#include "hpath/distance.hpp"
#include "hpath/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hpath;

TEST(CcDistance, OriginAndPlane) {
    const auto m = geom::build_heisenberg(1);
    EXPECT_EQ(conc::cc_distance(m, Vec::Zero(3)), 0.0);
    Vec p = Vec::Zero(3);
    p(0) = 0.7;
    p(1) = -0.4;
    EXPECT_NEAR(conc::cc_distance(m, p), std::sqrt(0.49 + 0.16), 1e-12);
}

TEST(CcDistance, AxisFormula) {
    const auto m = geom::build_heisenberg(1);
    for (double z : {0.05, 0.25, 1.0, -0.4}) {
        Vec p = Vec::Zero(3);
        p(2) = z;
        EXPECT_NEAR(conc::cc_distance(m, p), 2.0 * std::sqrt(kPi * std::abs(z)), 1e-8) << z;
    }
}

// Dilation invariance (x, y, z) -> (s x, s y, s^2 z) scales the distance by s.
TEST(CcDistance, DilationHomogeneity) {
    const auto m = geom::build_heisenberg(1);
    rng::Stream rs(41, 0, rng::Purpose::Probe);
    for (int rep = 0; rep < 50; ++rep) {
        Vec p(3);
        p << rs.gaussian(), rs.gaussian(), rs.gaussian();
        const double d1 = conc::cc_distance(m, p);
        for (double s : {0.5, 2.0}) {
            Vec q(3);
            q << s * p(0), s * p(1), s * s * p(2);
            ASSERT_NEAR(conc::cc_distance(m, q), s * d1, 1e-7 * (1.0 + s * d1));
        }
    }
}

TEST(CcDistance, SymmetryAndTriangle) {
    const auto m = geom::build_heisenberg(1);
    rng::Stream rs(42, 0, rng::Purpose::Probe);
    for (int rep = 0; rep < 100; ++rep) {
        Vec p(3), q(3);
        for (int i = 0; i < 3; ++i) {
            p(i) = 0.8 * rs.gaussian();
            q(i) = 0.8 * rs.gaussian();
        }
        const double dp = conc::cc_distance(m, p);
        ASSERT_NEAR(conc::cc_distance(m, m.group_inv(p)), dp, 1e-9 * (1.0 + dp));
        const double dpq = conc::cc_distance_between(m, p, q);
        ASSERT_LE(dpq, dp + conc::cc_distance(m, q) + 1e-8);
        ASSERT_NEAR(conc::cc_distance_between(m, q, p), dpq, 1e-9 * (1.0 + dpq));
    }
}

TEST(CcDistance, HigherHeisenberg) {
    const auto m = geom::build_heisenberg(2);
    Vec p = Vec::Zero(5);
    p(0) = 0.3;
    p(2) = 0.4; // a y-coordinate
    EXPECT_NEAR(conc::cc_distance(m, p), 0.5, 1e-12);
    Vec axis = Vec::Zero(5);
    axis(4) = 0.25;
    EXPECT_NEAR(conc::cc_distance(m, axis), 2.0 * std::sqrt(kPi * 0.25), 1e-8);
}

TEST(CcDistance, EuclideanIsNorm) {
    const auto m = geom::build_euclidean_degenerate(2);
    Vec p(2);
    p << 3.0, 4.0;
    EXPECT_EQ(conc::cc_distance(m, p), 5.0);
}

TEST(Koranyi, GaugeAndSandwich) {
    const auto m = geom::build_heisenberg(1);
    Vec p(3);
    p << 0.7, -0.4, 0.0;
    EXPECT_NEAR(conc::koranyi_gauge(m, p), std::sqrt(0.49 + 0.16), 1e-12);
    Vec axis = Vec::Zero(3);
    axis(2) = 0.25;
    EXPECT_NEAR(conc::koranyi_gauge(m, axis), 2.0 * std::sqrt(0.25), 1e-12);

    const auto s = conc::estimate_koranyi_sandwich(m);
    EXPECT_GT(s.c1, 1.0 - 1e-6);
    EXPECT_LT(s.c1, 1.0 + 1e-3);
    EXPECT_GT(s.c2, std::sqrt(kPi) - 1e-3);
    EXPECT_LT(s.c2, std::sqrt(kPi) + 1e-6);
}

TEST(Koranyi, SandwichEnforcementAcceptsRandomPoints) {
    const auto m = geom::build_heisenberg(1);
    conc::DistanceModel dist;
    dist.kind = conc::DistanceKind::CC;
    dist.enforce_sandwich = true;
    rng::Stream rs(43, 0, rng::Purpose::Probe);
    for (int rep = 0; rep < 200; ++rep) {
        Vec p(3);
        for (int i = 0; i < 3; ++i) p(i) = rs.gaussian();
        EXPECT_NO_THROW(dist.evaluate(m, p));
    }
}

TEST(EpsDistance, PlaneExactForAllEpsilon) {
    const auto m = geom::build_heisenberg(1);
    Vec p = Vec::Zero(3);
    p(0) = 0.5;
    p(1) = 0.5;
    for (double eps : {0.25, 1.0, 4.0}) {
        const auto d = conc::riemannian_eps_distance(m, p, eps);
        EXPECT_TRUE(d.converged);
        EXPECT_NEAR(d.value, std::sqrt(0.5), 1e-9);
    }
    EXPECT_THROW(conc::riemannian_eps_distance(m, p, 0.0), UsageError);
}

TEST(EpsDistance, MonotoneInEpsilonAndBelowCc) {
    const auto m = geom::build_heisenberg(1);
    rng::Stream rs(44, 0, rng::Purpose::Probe);
    for (int rep = 0; rep < 12; ++rep) {
        Vec p(3);
        p << 0.7 * rs.gaussian(), 0.7 * rs.gaussian(), 0.4 * rs.gaussian();
        const double dcc = conc::cc_distance(m, p);
        double prev = 1e300;
        for (double eps : {0.25, 0.5, 1.0, 2.0, 4.0}) {
            const auto d = conc::riemannian_eps_distance(m, p, eps);
            ASSERT_TRUE(d.converged) << "eps=" << eps;
            ASSERT_LE(d.value, dcc * (1.0 + 1e-7));
            ASSERT_LE(d.value, prev * (1.0 + 1e-7));
            ASSERT_GE(d.value + 1e-12, d.lower);
            prev = d.value;
        }
    }
}

TEST(EpsDistance, SubRiemannianLimit) {
    const auto m = geom::build_heisenberg(1);
    Vec p(3);
    p << 0.5, 0.2, 0.3;
    const double dcc = conc::cc_distance(m, p);
    const auto d = conc::riemannian_eps_distance(m, p, 1e-4);
    EXPECT_TRUE(d.converged);
    EXPECT_NEAR(d.value, dcc, 5e-3 * dcc);
}

TEST(EpsDistance, EuclideanFallsBackToNorm) {
    const auto m = geom::build_euclidean_degenerate(2);
    Vec p(2);
    p << 1.0, 1.0;
    const auto d = conc::riemannian_eps_distance(m, p, 0.5);
    EXPECT_TRUE(d.converged);
    EXPECT_EQ(d.value, std::sqrt(2.0));
}
