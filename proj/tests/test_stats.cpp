#include "hpath/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace hpath;

TEST(Stats, KahanSumBeatsNaiveOnAdversarialSeries) {
    stats::KahanSum k;
    long double exact = 0.0L;
    double naive = 0.0;
    for (int i = 0; i < 1000000; ++i) {
        const double x = (i % 2 == 0) ? 1.0 + 1e-14 * i : -1.0;
        k.add(x);
        naive += x;
        exact += static_cast<long double>(x);
    }
    const double err_kahan = std::abs(static_cast<double>(exact - k.value()));
    EXPECT_LT(err_kahan, 1e-9);
}

TEST(Stats, MeanVarMatchesTwoPass) {
    std::vector<double> xs;
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-2.0, 5.0);
    stats::MeanVar mv;
    for (int i = 0; i < 10000; ++i) {
        xs.push_back(u(gen));
        mv.add(xs.back());
    }
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= (xs.size() - 1.0);
    EXPECT_NEAR(mv.mean(), mean, 1e-12);
    EXPECT_NEAR(mv.variance(), var, 1e-10);
}

TEST(Stats, MergeEqualsSinglePass) {
    stats::MeanVar whole, left, right;
    for (int i = 0; i < 5000; ++i) {
        const double x = std::sin(i * 0.7) * (i % 13) + 0.1 * i;
        whole.add(x);
        (i < 1700 ? left : right).add(x);
    }
    left.merge(right);
    EXPECT_EQ(left.count(), whole.count());
    EXPECT_NEAR(left.mean(), whole.mean(), 1e-12);
    EXPECT_NEAR(left.variance(), whole.variance(), 1e-9);
}

TEST(Stats, EstimatorResultIntervalOrdering) {
    stats::MeanVar mv;
    for (int i = 0; i < 100; ++i) mv.add(static_cast<double>(i % 7));
    const auto r = stats::EstimatorResult::from(mv, 42);
    EXPECT_LE(r.ci_lo, r.mean);
    EXPECT_LE(r.mean, r.ci_hi);
    EXPECT_EQ(r.n, 100u);
    EXPECT_EQ(r.seed, 42u);
}

TEST(Stats, WilsonKnownValue) {
    // 5 successes out of 10, two-sided 95%: the textbook Wilson interval
    const auto w = stats::wilson(5, 10, stats::kZ95TwoSided);
    EXPECT_NEAR(w.p_hat, 0.5, 1e-15);
    EXPECT_NEAR(w.lo, 0.2366, 2e-4);
    EXPECT_NEAR(w.hi, 0.7634, 2e-4);
}

TEST(Stats, WilsonEdgeCases) {
    const auto w0 = stats::wilson(0, 50, stats::kZ95TwoSided);
    EXPECT_EQ(w0.p_hat, 0.0);
    EXPECT_EQ(w0.lo, 0.0);
    EXPECT_GT(w0.hi, 0.0); // zero counts still give a one-sided upper bound
    const auto w1 = stats::wilson(50, 50, stats::kZ95TwoSided);
    EXPECT_LT(w1.lo, 1.0);
    EXPECT_EQ(w1.hi, 1.0);
    const auto we = stats::wilson(0, 0, stats::kZ95TwoSided);
    EXPECT_EQ(we.p_hat, 0.0);
}

TEST(Stats, WilsonNestsWithSampleSize) {
    const auto small = stats::wilson(10, 100, stats::kZ95TwoSided);
    const auto large = stats::wilson(100, 1000, stats::kZ95TwoSided);
    EXPECT_LT(large.hi - large.lo, small.hi - small.lo);
}

TEST(Stats, RegressionSlopeExactLine) {
    std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    std::vector<double> y{2.5, 4.0, 5.5, 7.0};
    EXPECT_NEAR(stats::regression_slope(x, y), 1.5, 1e-14);
    EXPECT_THROW(stats::regression_slope({1.0}, {2.0}), UsageError);
    EXPECT_THROW(stats::regression_slope({1.0, 1.0}, {2.0, 3.0}), UsageError);
}

TEST(Stats, ZScoreConventions) {
    EXPECT_NEAR(stats::z_score(1.0, 0.1, 0.5, 0.0), 5.0, 1e-12);
    EXPECT_EQ(stats::z_score(1.0, 0.0, 1.0, 0.0), 0.0);
}
