#include "hpath/rng.hpp"
#include "hpath/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace hpath;

TEST(Rng, SameSeedBitIdentical) {
    rng::Stream a(1234, 7, rng::Purpose::Path);
    rng::Stream b(1234, 7, rng::Purpose::Path);
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(a.next_u64(), b.next_u64());
    }
    rng::Stream c(1234, 7, rng::Purpose::Path);
    rng::Stream d(1234, 7, rng::Purpose::Path);
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(c.gaussian(), d.gaussian());
    }
}

TEST(Rng, PathIndexAndPurposeSeparateStreams) {
    rng::Stream a(99, 0, rng::Purpose::Path);
    rng::Stream b(99, 1, rng::Purpose::Path);
    rng::Stream c(99, 0, rng::Purpose::InnerPath);
    int differ_idx = 0, differ_purpose = 0;
    for (int i = 0; i < 64; ++i) {
        const auto va = a.next_u64();
        if (va != b.next_u64()) ++differ_idx;
        if (va != c.next_u64()) ++differ_purpose;
    }
    EXPECT_GT(differ_idx, 60);
    EXPECT_GT(differ_purpose, 60);
}

TEST(Rng, GaussianMoments) {
    stats::MeanVar mv;
    rng::Stream s(2024, 0, rng::Purpose::Path);
    const int n = 200000;
    double sum4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = s.gaussian();
        mv.add(g);
        sum4 += g * g * g * g;
    }
    EXPECT_LT(std::abs(mv.mean() / mv.stderr_mean()), 4.0);
    const double var = mv.variance();
    const double var_se = std::sqrt(2.0 / (n - 1.0));
    EXPECT_LT(std::abs(var - 1.0) / var_se, 4.0);
    // kurtosis of a standard normal is 3
    const double kurt = sum4 / n;
    EXPECT_NEAR(kurt, 3.0, 0.12);
}

TEST(Rng, CrossStreamDecorrelation) {
    stats::MeanVar cross;
    for (int i = 0; i < 20000; ++i) {
        rng::Stream a(5, static_cast<std::uint64_t>(i), rng::Purpose::Path);
        rng::Stream b(5, static_cast<std::uint64_t>(i) + 1, rng::Purpose::Path);
        cross.add(a.gaussian() * b.gaussian());
    }
    EXPECT_LT(std::abs(cross.mean() / cross.stderr_mean()), 4.0);
}

TEST(Rng, UniformInHalfOpenUnit) {
    rng::Stream s(7, 0, rng::Purpose::Path);
    for (int i = 0; i < 100000; ++i) {
        const double u = s.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LE(u, 1.0);
    }
}
