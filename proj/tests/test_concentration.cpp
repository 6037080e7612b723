#include "hpath/concentration.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hpath;

TEST(Herbst, BoundValues) {
    geom::CurvatureBounds b;
    b.K = 0.0;
    b.kappa = 1.0;
    // exp(-r^2 / (2 T e^{(K + kappa/eps) T})) at eps = T = 1
    EXPECT_NEAR(conc::herbst_bound_value(b, 1.0, 1.0, 1.0), 0.83199, 1e-4);
    EXPECT_NEAR(conc::herbst_bound_value(b, 1.0, 1.0, 2.0), 0.47914, 1e-4);
    EXPECT_EQ(conc::herbst_bound_value(b, 1.0, 1.0, 0.0), 1.0);
    // decreasing in r
    EXPECT_GT(conc::herbst_bound_value(b, 1.0, 1.0, 0.5),
              conc::herbst_bound_value(b, 1.0, 1.0, 1.5));
}

TEST(LowerBoundConstant, ValuesAndLimits) {
    const auto m = geom::build_heisenberg(1);
    // D = 8, n = 2: 4 + 48 ln 2
    EXPECT_NEAR(conc::lower_bound_constant(m, 1.0, 1.0), 37.2712, 1e-3);
    EXPECT_NEAR(conc::lower_bound_constant(m, 1e-9, 1.0), 4.0, 1e-6);
    EXPECT_NEAR(conc::lower_bound_constant(m, 1.0, 1e9), 4.0, 1e-6);
    const auto e = geom::build_euclidean_degenerate(1);
    EXPECT_THROW(conc::lower_bound_constant(e, 1.0, 1.0), UsageError);
}

TEST(SlopeWindow, HeisenbergAndScaling) {
    const auto m = geom::build_heisenberg(1);
    const auto w1 = conc::tail_slope_window(m, 1.0);
    EXPECT_NEAR(w1.lo, -2.0, 1e-12);
    EXPECT_NEAR(w1.hi, -0.5, 1e-12);
    const auto w2 = conc::tail_slope_window(m, 2.0);
    EXPECT_NEAR(w2.lo, -1.0, 1e-12);
    EXPECT_NEAR(w2.hi, -0.25, 1e-12);
    const auto e = geom::build_euclidean_degenerate(1);
    const auto we = conc::tail_slope_window(e, 1.0);
    EXPECT_EQ(we.lo, we.hi);
    EXPECT_NEAR(we.hi, -0.5, 1e-12);
}

TEST(Tails, CurveMonotoneAndCenteredMedianEvent) {
    const auto m = geom::build_euclidean_degenerate(1);
    const auto grid = sde::TimeGrid::make(1.0, 200);
    conc::DistanceModel dist;
    dist.kind = conc::DistanceKind::CC;
    std::vector<double> r_grid{0.0, 0.25, 0.5, 1.0, 1.5, 2.0};
    const auto curve = conc::sup_distance_tail(m, grid, Vec::Zero(1), dist, r_grid, 51, 20000, 1,
                                               true);
    ASSERT_EQ(curve.points.size(), r_grid.size());
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        ASSERT_LE(curve.points[i].p_hat, curve.points[i - 1].p_hat);
    }
    // r = 0 is a median-type event for the centered sup
    EXPECT_GT(curve.points[0].wilson_lo, 0.0);
    EXPECT_LT(curve.points[0].wilson_hi, 1.0);
    EXPECT_GT(curve.e_sup, 0.0);
    EXPECT_THROW(
        conc::sup_distance_tail(m, grid, Vec::Zero(1), dist, {}, 51, 100, 1, true), UsageError);
}

// Uncentered tail of sup |B| against the reflection-principle value
// P(sup |B| >= x) ~ 4 Phi-bar(x) at moderate x.
TEST(Tails, EuclideanReflectionComparison) {
    const auto m = geom::build_euclidean_degenerate(1);
    const auto grid = sde::TimeGrid::make(1.0, 1000);
    conc::DistanceModel dist;
    dist.kind = conc::DistanceKind::CC;
    std::vector<double> r_grid{2.0};
    const auto curve = conc::sup_distance_tail(m, grid, Vec::Zero(1), dist, r_grid, 52, 40000, 1,
                                               false);
    const double p_true = 4.0 * 0.5 * std::erfc(2.0 / std::sqrt(2.0));
    EXPECT_NEAR(curve.points[0].p_hat, p_true, 0.015);
}

TEST(Tails, HerbstCheckPassesOnHeisenberg) {
    const auto m = geom::build_heisenberg(1);
    const auto grid = sde::TimeGrid::make(1.0, 500);
    const auto r = conc::herbst_bound_check(m, grid, Vec::Zero(3), 1.0, {0.5, 1.0, 1.5, 2.0}, 53,
                                            10000, 1);
    EXPECT_TRUE(r.pass);
    for (const auto& pt : r.curve.points) {
        EXPECT_GT(pt.bound_value, 0.0);
        EXPECT_LE(pt.upper_one_sided, pt.bound_value) << "r=" << pt.r;
    }
}

TEST(Tails, SlopeSandwichEuclidean) {
    const auto m = geom::build_euclidean_degenerate(1);
    const auto grid = sde::TimeGrid::make(1.0, 500);
    std::vector<double> r_grid;
    for (double r = 0.5; r <= 7.0; r += 0.5) r_grid.push_back(r);
    const auto r = conc::tail_slope_sandwich(m, grid, Vec::Zero(1), r_grid, 54, 400000, 1);
    ASSERT_EQ(r.verdict != conc::SlopeVerdict::Inconclusive, true);
    // both window endpoints collapse to -1/(2T); +-15% slack around it
    EXPECT_GT(r.slope, -0.5 * 1.15);
    EXPECT_LT(r.slope, -0.5 * 0.85);
}

TEST(Tails, SlopeInconclusiveOnTinySamples) {
    const auto m = geom::build_heisenberg(1);
    const auto grid = sde::TimeGrid::make(1.0, 100);
    std::vector<double> r_grid{5.0, 6.0, 7.0}; // far beyond any sample
    const auto r = conc::tail_slope_sandwich(m, grid, Vec::Zero(3), r_grid, 55, 200, 1);
    EXPECT_EQ(r.verdict, conc::SlopeVerdict::Inconclusive);
}

TEST(Tails, SupPruningMatchesBruteForce) {
    const auto m = geom::build_heisenberg(1);
    const auto grid = sde::TimeGrid::make(1.0, 200);
    conc::DistanceModel dist;
    dist.kind = conc::DistanceKind::CC;
    for (int i = 0; i < 10; ++i) {
        rng::Stream s(56, static_cast<std::uint64_t>(i), rng::Purpose::Path);
        const auto inc = sde::sample_brownian(2, grid, s);
        const auto p = sde::integrate_horizontal_bm(m, grid, inc, Vec::Zero(3));
        double brute = 0.0;
        for (int k = 0; k <= grid.n_steps; ++k) {
            brute = std::max(brute, conc::cc_distance(m, p.state(k)));
        }
        const double pruned = conc::path_sup_distance(m, dist, p, Vec::Zero(3));
        ASSERT_EQ(pruned, brute);
    }
}
