#pragma once

#include "hpath/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

// Deterministic statistics building blocks: compensated accumulators that
// merge in a fixed order (so 1-worker and k-worker runs agree exactly),
// estimator summaries, and Wilson intervals.

namespace hpath::stats {

inline constexpr double kZ95TwoSided = 1.959963984540054;
inline constexpr double kZ95OneSided = 1.6448536269514722;

// Kahan-compensated scalar sum.
class KahanSum {
public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    void merge(const KahanSum& other) {
        add(other.s_);
        add(-other.c_);
    }
    double value() const { return s_ - c_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

// Streaming mean/variance (Welford) with Chan's merge rule. Merging blocks
// in index order keeps results independent of the worker count.
class MeanVar {
public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    void merge(const MeanVar& o) {
        if (o.n_ == 0) return;
        if (n_ == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n_);
        const double nb = static_cast<double>(o.n_);
        const double d = o.mean_ - mean_;
        const double nt = na + nb;
        mean_ += d * nb / nt;
        m2_ += o.m2_ + d * d * na * nb / nt;
        n_ += o.n_;
    }
    std::uint64_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double stderr_mean() const {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

// Monte Carlo estimate with 95% confidence interval and seed provenance.
struct EstimatorResult {
    double mean = 0.0;
    double stderr_mean = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::uint64_t n = 0;
    std::uint64_t seed = 0;
    double wall_time_s = 0.0;

    static EstimatorResult from(const MeanVar& mv, std::uint64_t seed) {
        EstimatorResult r;
        r.mean = mv.mean();
        r.stderr_mean = mv.stderr_mean();
        r.ci_lo = r.mean - kZ95TwoSided * r.stderr_mean;
        r.ci_hi = r.mean + kZ95TwoSided * r.stderr_mean;
        r.n = mv.count();
        r.seed = seed;
        return r;
    }
};

// Two-sample z-score: difference of means over combined standard error.
inline double z_score(double mean_a, double se_a, double mean_b, double se_b) {
    const double se = std::sqrt(se_a * se_a + se_b * se_b);
    if (se == 0.0) return mean_a == mean_b ? 0.0 : std::numeric_limits<double>::infinity();
    return (mean_a - mean_b) / se;
}

struct WilsonInterval {
    double p_hat = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

inline WilsonInterval wilson(std::uint64_t successes, std::uint64_t n, double z) {
    WilsonInterval w;
    if (n == 0) return w;
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nn;
    w.p_hat = p;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    w.lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
    w.hi = successes == n ? 1.0 : std::min(1.0, center + half);
    return w;
}

// Least-squares slope of y against x.
inline double regression_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw UsageError("regression_slope: need >= 2 points");
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw UsageError("regression_slope: degenerate abscissae");
    return sxy / sxx;
}

} // namespace hpath::stats
