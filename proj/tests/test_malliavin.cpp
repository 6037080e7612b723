#include "hpath/malliavin.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hpath;
using malliavin::parse_cylinder_function;
using malliavin::parse_gamma;

namespace {

struct PathBundle {
    sde::HorizontalPath path;
    sde::TransportState transport;
};

PathBundle make_bundle(const geom::ModelFoliation& m, const sde::TimeGrid& grid, double eps,
                       std::uint64_t seed, std::uint64_t idx) {
    PathBundle b;
    rng::Stream s(seed, idx, rng::Purpose::Path);
    const auto inc = sde::sample_brownian(m.dim_h, grid, s);
    sde::integrate_horizontal_bm(m, grid, inc, Vec::Zero(m.dim()), b.path);
    sde::TransportOptions opt;
    opt.epsilon = eps;
    sde::integrate_transport(m, b.path, opt, b.transport);
    return b;
}

} // namespace

TEST(Gradients, ConstantFunctionGivesZero) {
    const auto m = geom::build_heisenberg(1);
    auto grid = sde::TimeGrid::make(1.0, 100);
    grid.set_partition({1.0});
    const auto b = make_bundle(m, grid, 1.0, 1, 0);
    const auto f = parse_cylinder_function("const:4.0", 3);
    for (const auto& g : {malliavin::intrinsic_gradient(m, f, b.path, b.transport),
                          malliavin::damped_gradient(m, f, b.path, b.transport)}) {
        for (const Vec& v : g.values) ASSERT_EQ(v.cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Gradients, EuclideanCoordinate) {
    const auto m = geom::build_euclidean_degenerate(2);
    auto grid = sde::TimeGrid::make(1.0, 50);
    grid.set_partition({0.5}); // t_1 strictly inside to exercise the cutoff
    const auto b = make_bundle(m, grid, 1.0, 2, 0);
    const auto f = parse_cylinder_function("coord:0", 2);
    const auto gi = malliavin::intrinsic_gradient(m, f, b.path, b.transport);
    const auto gd = malliavin::damped_gradient(m, f, b.path, b.transport);
    for (int k = 0; k <= 50; ++k) {
        if (k <= 25) {
            ASSERT_EQ(gi.values[k](0), 1.0);
            ASSERT_EQ(gi.values[k](1), 0.0);
        } else {
            ASSERT_EQ(gi.values[k].cwiseAbs().maxCoeff(), 0.0);
        }
        ASSERT_EQ((gi.values[k] - gd.values[k]).cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Gradients, IntrinsicNormConstantOnFirstInterval) {
    const auto m = geom::build_heisenberg(1);
    auto grid = sde::TimeGrid::make(1.0, 100);
    grid.set_partition({1.0});
    const double eps = 0.8;
    const auto b = make_bundle(m, grid, eps, 3, 1);
    const auto f = parse_cylinder_function("coord:2", 3);
    const auto g = malliavin::intrinsic_gradient(m, f, b.path, b.transport);
    const double ref = m.covector_norm_sq(g.values[0], eps);
    EXPECT_GT(ref, 0.0);
    for (int k = 0; k <= 100; ++k) {
        ASSERT_EQ(m.covector_norm_sq(g.values[k], eps), ref);
    }
}

// Pathwise interval bound for the damped gradient: on (t_{l-1}, t_l] its
// eps-norm is at most e^{(K + kappa/eps)(t_l - s)/2} times the norm of the
// transported suffix at t_l (up to integrator tolerance).
TEST(Gradients, DampedIntervalBound) {
    const auto m = geom::build_heisenberg(1);
    auto grid = sde::TimeGrid::make(1.0, 500);
    grid.set_partition({0.5, 1.0});
    const double eps = 1.0;
    const double rate = m.bounds.K + m.bounds.kappa / eps;
    const auto f = parse_cylinder_function("poly:0,2", 3);
    for (int i = 0; i < 20; ++i) {
        const auto b = make_bundle(m, grid, eps, 4, static_cast<std::uint64_t>(i));
        const auto g = malliavin::damped_gradient(m, f, b.path, b.transport);
        const auto difs = malliavin::coframe_differentials(m, f, b.path);
        // suffix at each partition time
        for (std::size_t l = 0; l < grid.partition_indices.size(); ++l) {
            const int kl = grid.partition_indices[l];
            Vec w = Vec::Zero(3);
            for (std::size_t i2 = l; i2 < grid.partition_indices.size(); ++i2) {
                w += b.transport.tau[static_cast<std::size_t>(grid.partition_indices[i2])] *
                     difs[i2];
            }
            const double ref =
                std::sqrt(m.covector_norm_sq(b.transport.tau_inv[static_cast<std::size_t>(kl)] * w, eps));
            const int k_lo = l == 0 ? 0 : grid.partition_indices[l - 1];
            for (int k = k_lo + 1; k <= kl; k += 37) {
                const double norm = std::sqrt(m.covector_norm_sq(g.values[static_cast<std::size_t>(k)], eps));
                const double bound =
                    std::exp(0.5 * rate * (grid.time_of(kl) - grid.time_of(k))) * ref;
                ASSERT_LE(norm, bound * (1.0 + 20.0 * grid.dt));
            }
        }
    }
}

// Damped gradient via tau^{-1} tau_{t_i} equals the route through the
// rotation/damping factorization within matrix-inversion tolerance.
TEST(Gradients, DampedViaFactorizationConsistent) {
    const auto m = geom::build_heisenberg(1);
    auto grid = sde::TimeGrid::make(1.0, 200);
    grid.set_partition({0.5, 1.0});
    const auto f = parse_cylinder_function("poly:0,2", 3);
    for (double eps : {0.5, 1.0}) {
        const auto b = make_bundle(m, grid, eps, 5, 2);
        const auto difs = malliavin::coframe_differentials(m, f, b.path);
        const auto& tr = b.transport;
        for (int k = 0; k <= 200; k += 17) {
            for (std::size_t i = 0; i < grid.partition_indices.size(); ++i) {
                const int ki = grid.partition_indices[i];
                if (ki < k) continue;
                const Vec direct = tr.tau_inv[static_cast<std::size_t>(k)] *
                                   (tr.tau[static_cast<std::size_t>(ki)] * difs[i]);
                const Vec split = tr.theta[static_cast<std::size_t>(k)].inverse() *
                                  (tr.m[static_cast<std::size_t>(k)].inverse() *
                                   (tr.m[static_cast<std::size_t>(ki)] *
                                    (tr.theta[static_cast<std::size_t>(ki)] * difs[i])));
                ASSERT_LT((direct - split).cwiseAbs().maxCoeff(), 1e-10);
            }
        }
    }
}

TEST(Ibp, EuclideanLinearMatchesClosedForm) {
    // E[ B_T * int_0^T dB ] = T and the damped side is exactly T pathwise
    const auto m = geom::build_euclidean_degenerate(1);
    auto grid = sde::TimeGrid::make(1.0, 100);
    grid.set_partition({1.0});
    const auto f = parse_cylinder_function("coord:0", 1);
    const auto gamma = parse_gamma("const:0", 1);
    const auto r = malliavin::ibp_check(m, grid, Vec::Zero(1), f, gamma, 1.0, 17, 20000, 1);
    EXPECT_NEAR(r.rhs.mean, 1.0, 1e-12);
    EXPECT_NEAR(r.rhs.stderr_mean, 0.0, 1e-12);
    EXPECT_LT(std::abs(r.lhs.mean - 1.0) / r.lhs.stderr_mean, 4.0);
    EXPECT_LT(std::abs(r.z), 4.0);
    EXPECT_FALSE(r.variance_flag);
}

TEST(Ibp, ConstantFunctionBothSidesVanish) {
    const auto m = geom::build_heisenberg(1);
    auto grid = sde::TimeGrid::make(1.0, 100);
    grid.set_partition({1.0});
    const auto f = parse_cylinder_function("const:2.0", 3);
    const auto gamma = parse_gamma("ramp:1", 2);
    const auto r = malliavin::ibp_check(m, grid, Vec::Zero(3), f, gamma, 1.0, 18, 5000, 1);
    EXPECT_EQ(r.rhs.mean, 0.0);
    EXPECT_LT(std::abs(r.lhs.mean / r.lhs.stderr_mean), 4.0);
}

TEST(Ibp, HeisenbergVerticalCoordinate) {
    const auto m = geom::build_heisenberg(1);
    auto grid = sde::TimeGrid::make(1.0, 250);
    grid.set_partition({1.0});
    const auto f = parse_cylinder_function("coord:2", 3);
    const auto gamma = parse_gamma("const:0", 2);
    const auto r = malliavin::ibp_check(m, grid, Vec::Zero(3), f, gamma, 1.0, 19, 20000, 1);
    EXPECT_LT(std::abs(r.z), 4.0);
    EXPECT_FALSE(r.variance_flag);
}

TEST(GradExpectation, EuclideanLinearExact) {
    const auto m = geom::build_euclidean_degenerate(2);
    auto grid = sde::TimeGrid::make(1.0, 50);
    grid.set_partition({1.0});
    const auto f = parse_cylinder_function("coord:0", 2);
    const auto r = malliavin::gradient_of_expectation_check(m, grid, Vec::Zero(2), f, 1.0, 20,
                                                            500, 1);
    EXPECT_EQ(r.lhs_mean(0), 1.0);
    EXPECT_EQ(r.rhs_mean(0), 1.0);
    EXPECT_EQ(r.max_abs_z, 0.0); // identical pathwise
}

TEST(GradExpectation, ConstantVanishes) {
    const auto m = geom::build_heisenberg(1);
    auto grid = sde::TimeGrid::make(1.0, 50);
    grid.set_partition({1.0});
    const auto f = parse_cylinder_function("const:1.0", 3);
    const auto r = malliavin::gradient_of_expectation_check(m, grid, Vec::Zero(3), f, 1.0, 21,
                                                            500, 1);
    EXPECT_EQ(r.lhs_mean.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(r.rhs_mean.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GradExpectation, HeisenbergVerticalCoordinate) {
    const auto m = geom::build_heisenberg(1);
    auto grid = sde::TimeGrid::make(1.0, 250);
    grid.set_partition({1.0});
    const auto f = parse_cylinder_function("coord:2", 3);
    const auto r = malliavin::gradient_of_expectation_check(m, grid, Vec::Zero(3), f, 1.0, 22,
                                                            20000, 1);
    EXPECT_LT(r.max_abs_z, 4.0);
}

TEST(GradExpectation, NonOriginStart) {
    const auto m = geom::build_heisenberg(1);
    auto grid = sde::TimeGrid::make(1.0, 200);
    grid.set_partition({1.0});
    Vec x0(3);
    x0 << 0.3, -0.2, 0.1;
    const auto f = parse_cylinder_function("coord:2", 3);
    const auto r = malliavin::gradient_of_expectation_check(m, grid, x0, f, 1.0, 23, 20000, 1);
    EXPECT_LT(r.max_abs_z, 4.0);
}

TEST(ClarkOcone, ConstantFunctionZeroResidual) {
    const auto m = geom::build_heisenberg(1);
    auto grid = sde::TimeGrid::make(1.0, 20);
    grid.set_partition({1.0});
    const auto f = parse_cylinder_function("const:5.0", 3);
    const auto r = malliavin::clark_ocone_residual_n1(m, grid, Vec::Zero(3), f, 1.0, 24, 50, 2, 1,
                                                      200);
    EXPECT_LT(r.residual_sq.mean, 1e-25);
}

TEST(ClarkOcone, EuclideanLinearResidualAtNoiseFloor) {
    const auto m = geom::build_euclidean_degenerate(1);
    auto grid = sde::TimeGrid::make(1.0, 100);
    grid.set_partition({1.0});
    const auto f = parse_cylinder_function("coord:0", 1);
    const auto r = malliavin::clark_ocone_residual_n1(m, grid, Vec::Zero(1), f, 1.0, 25, 100, 2, 1,
                                                      20000);
    // kernel is exactly e1; the discrete integral telescopes B_T, so the
    // only residual is the estimated mean
    EXPECT_LT(r.residual_sq.mean, 2.0 * grid.dt);
}

TEST(ClarkOcone, BudgetCapEnforced) {
    const auto m = geom::build_heisenberg(1);
    auto grid = sde::TimeGrid::make(1.0, 10);
    grid.set_partition({1.0});
    const auto f = parse_cylinder_function("coord:2", 3);
    EXPECT_THROW(malliavin::clark_ocone_residual_n1(m, grid, Vec::Zero(3), f, 1.0, 26, 100000,
                                                    1000, 1),
                 UsageError);
    auto grid2 = sde::TimeGrid::make(1.0, 10);
    grid2.set_partition({0.5, 1.0});
    const auto f2 = parse_cylinder_function("prod:0,1", 3);
    EXPECT_THROW(malliavin::clark_ocone_residual_n1(m, grid2, Vec::Zero(3), f2, 1.0, 26, 10, 2, 1),
                 UsageError);
}

TEST(DirichletEnergy, EuclideanCoordinateGivesHorizon) {
    const auto m = geom::build_euclidean_degenerate(1);
    auto grid = sde::TimeGrid::make(1.0, 50);
    grid.set_partition({1.0});
    const auto f = parse_cylinder_function("coord:0", 1);
    const auto e = malliavin::dirichlet_energy(m, grid, Vec::Zero(1), f, f, 1.0, 27, 2000, 1);
    EXPECT_NEAR(e.mean, 1.0, 1e-12);
    EXPECT_NEAR(e.stderr_mean, 0.0, 1e-12);
}

TEST(DirichletEnergy, SymmetricAndPsd) {
    const auto m = geom::build_heisenberg(1);
    auto grid = sde::TimeGrid::make(1.0, 100);
    grid.set_partition({1.0});
    const auto f = parse_cylinder_function("coord:2", 3);
    const auto g = parse_cylinder_function("bump:0,0.5", 3);
    const auto efg = malliavin::dirichlet_energy(m, grid, Vec::Zero(3), f, g, 1.0, 28, 2000, 1);
    const auto egf = malliavin::dirichlet_energy(m, grid, Vec::Zero(3), g, f, 1.0, 28, 2000, 1);
    EXPECT_EQ(efg.mean, egf.mean); // same paths, same pairing
    const auto eff = malliavin::dirichlet_energy(m, grid, Vec::Zero(3), f, f, 1.0, 28, 2000, 1);
    EXPECT_GE(eff.mean, 0.0);
}

TEST(DirichletEnergy, StderrShrinksLikeRootN) {
    const auto m = geom::build_heisenberg(1);
    auto grid = sde::TimeGrid::make(1.0, 100);
    grid.set_partition({1.0});
    const auto f = parse_cylinder_function("coord:2", 3);
    const auto small = malliavin::dirichlet_energy(m, grid, Vec::Zero(3), f, f, 1.0, 29, 2000, 1);
    const auto large = malliavin::dirichlet_energy(m, grid, Vec::Zero(3), f, f, 1.0, 29, 8000, 1);
    const double ratio = small.stderr_mean / large.stderr_mean;
    EXPECT_GT(ratio, 1.6); // quadrupling n halves the standard error
    EXPECT_LT(ratio, 2.6);
}

TEST(Gamma, RegistryAndValidation) {
    const auto g = parse_gamma("sin:0,3.0", 2);
    EXPECT_NEAR(g.derivative(0.5)(0), std::sin(1.5), 1e-15);
    EXPECT_THROW(parse_gamma("const:5", 2), UsageError);
    EXPECT_THROW(parse_gamma("wiggle:0", 2), UsageError);
    const auto r = parse_gamma("ramp:1", 2);
    EXPECT_EQ(r.derivative(0.25)(1), 0.25);
    EXPECT_EQ(r.derivative(0.25)(0), 0.0);
}

TEST(Ibp, EpsilonMismatchGuards) {
    const auto m = geom::build_heisenberg(1);
    auto grid = sde::TimeGrid::make(1.0, 10);
    grid.set_partition({0.5, 1.0});
    const auto f = parse_cylinder_function("coord:2", 3); // n=1 vs partition n=2
    const auto gamma = parse_gamma("const:0", 2);
    EXPECT_THROW(malliavin::ibp_check(m, grid, Vec::Zero(3), f, gamma, 1.0, 1, 10, 1), UsageError);
}
