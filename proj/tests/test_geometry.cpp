#include "hpath/geometry.hpp"
#include "hpath/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hpath;

TEST(Geometry, HeisenbergConstruction) {
    const auto m = geom::build_heisenberg(1);
    EXPECT_EQ(m.name, "heisenberg-1");
    EXPECT_EQ(m.dim_h, 2);
    EXPECT_EQ(m.dim_v, 1);
    EXPECT_EQ(m.bounds.K, 0.0);
    EXPECT_EQ(m.bounds.kappa, 1.0);
    ASSERT_TRUE(m.bounds.rho2.has_value());
    EXPECT_EQ(*m.bounds.rho2, 0.5);
    EXPECT_EQ(m.torsion[0](0, 1), -1.0); // T(X, Y) = -Z
    EXPECT_EQ(m.torsion[0](1, 0), 1.0);

    const auto m2 = geom::build_heisenberg(2);
    EXPECT_EQ(m2.dim_h, 4);
    EXPECT_EQ(*m2.bounds.rho2, 1.0);

    EXPECT_THROW(geom::build_heisenberg(0), UsageError);
    EXPECT_THROW(geom::build_euclidean_degenerate(0), UsageError);
    EXPECT_THROW(geom::build_model("noise-3"), UsageError);
    EXPECT_EQ(geom::build_model("euclidean-2").dim_h, 2);
}

// The defining relation g_H(J_Z X, Y) = g_V(Z, T(X, Y)) solved by hand on
// H^1 for unit Z gives J X = -Y, J Y = X.
TEST(Geometry, JEndomorphismMatchesHandSolve) {
    const auto m = geom::build_heisenberg(1);
    Vec z_full = Vec::Zero(3);
    z_full(2) = 1.0;
    const Mat j = geom::j_endomorphism(m, z_full);
    EXPECT_EQ(j(0, 0), 0.0);
    EXPECT_EQ(j(0, 1), 1.0);
    EXPECT_EQ(j(1, 0), -1.0);
    EXPECT_EQ(j(1, 1), 0.0);

    // zero map for Z = 0, linearity in Z
    EXPECT_EQ(geom::j_endomorphism(m, Vec::Zero(3)).cwiseAbs().maxCoeff(), 0.0);
    Vec z2 = Vec::Zero(3);
    z2(2) = 2.0;
    EXPECT_EQ((geom::j_endomorphism(m, z2) - 2.0 * j).cwiseAbs().maxCoeff(), 0.0);

    Vec bad = Vec::Zero(3);
    bad(0) = 0.5;
    EXPECT_THROW(geom::j_endomorphism(m, bad), UsageError);
}

TEST(Geometry, JSkewSymmetryExactOnRandomProbes) {
    for (int n : {1, 2}) {
        const auto m = geom::build_heisenberg(n);
        rng::Stream s(11, 0, rng::Purpose::Probe);
        for (int rep = 0; rep < 1000; ++rep) {
            Vec z(m.dim_v);
            for (int a = 0; a < m.dim_v; ++a) z(a) = s.gaussian();
            const Mat j = m.j_matrix_vertical(z);
            ASSERT_EQ((j + j.transpose()).cwiseAbs().maxCoeff(), 0.0);
        }
    }
}

TEST(Geometry, JsqNegativeSemidefiniteWithKappaBound) {
    for (int n : {1, 2}) {
        const auto m = geom::build_heisenberg(n);
        const Mat jsq = m.jsq();
        EXPECT_LT((jsq - jsq.transpose()).cwiseAbs().maxCoeff(), 1e-15);
        rng::Stream s(12, 0, rng::Purpose::Probe);
        for (int rep = 0; rep < 1000; ++rep) {
            Vec eta(m.dim_h);
            for (int i = 0; i < m.dim_h; ++i) eta(i) = s.gaussian();
            const double q = -eta.dot(jsq * eta);
            ASSERT_GE(q, 0.0);
            ASSERT_LE(q, m.bounds.kappa * eta.squaredNorm() * (1.0 + 1e-12));
        }
    }
    // On H^n the bound saturates: J^2 = -Id on the horizontal space.
    const auto m = geom::build_heisenberg(1);
    EXPECT_LT((m.jsq() + Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Geometry, Rho2TraceBound) {
    const auto m = geom::build_heisenberg(1);
    rng::Stream s(13, 0, rng::Purpose::Probe);
    for (int rep = 0; rep < 200; ++rep) {
        Vec z(1);
        z(0) = s.gaussian();
        const Mat jz = m.j_matrix_vertical(z);
        const double lhs = -0.25 * (jz * jz).trace();
        ASSERT_GE(lhs, *m.bounds.rho2 * z.squaredNorm() - 1e-14);
    }
    EXPECT_LE(geom::validate_bounds(m, 1000, s), 1e-12);
}

TEST(Geometry, YangMillsResiduals) {
    rng::Stream s(14, 0, rng::Purpose::Probe);
    std::vector<Vec> pts;
    for (int rep = 0; rep < 8; ++rep) {
        Vec x(3);
        for (int i = 0; i < 3; ++i) x(i) = s.gaussian();
        pts.push_back(x);
    }
    EXPECT_LT(geom::yang_mills_check(geom::build_heisenberg(1), pts), 1e-12);
    std::vector<Vec> pts5;
    for (int rep = 0; rep < 8; ++rep) {
        Vec x(5);
        for (int i = 0; i < 5; ++i) x(i) = s.gaussian();
        pts5.push_back(x);
    }
    EXPECT_LT(geom::yang_mills_check(geom::build_heisenberg(2), pts5), 1e-10);
    std::vector<Vec> pts2;
    for (int rep = 0; rep < 4; ++rep) pts2.push_back(Vec::Zero(2));
    EXPECT_EQ(geom::yang_mills_check(geom::build_euclidean_degenerate(2), pts2), 0.0);
}

TEST(Geometry, DualNormMonotoneInEpsilon) {
    const auto m = geom::build_heisenberg(1);
    Vec eta(3);
    eta << 0.3, -0.2, 0.7; // nonzero vertical part
    double prev = m.covector_norm_sq(eta, 0.25);
    for (double eps : {0.5, 1.0, 2.0, 4.0}) {
        const double cur = m.covector_norm_sq(eta, eps);
        ASSERT_GT(cur, prev);
        prev = cur;
    }
    Vec flat(3);
    flat << 0.3, -0.2, 0.0; // purely horizontal: eps-independent
    EXPECT_EQ(m.covector_norm_sq(flat, 0.25), m.covector_norm_sq(flat, 4.0));
    EXPECT_GE(m.covector_norm_sq(eta, 0.1), 0.0);
}

// The transport generators must be skew-symmetric for the dual g_eps metric;
// this pins the type-consistent reading of the vertical case of the
// connection perturbation.
TEST(Geometry, TransportGeneratorsEpsSkew) {
    for (double eps : {0.25, 1.0, 3.0}) {
        for (int n : {1, 2}) {
            const auto m = geom::build_heisenberg(n);
            const Mat g = m.g_eps_covector(eps);
            for (const Mat& a : m.transport_generators(eps)) {
                ASSERT_LT((g * a + a.transpose() * g).cwiseAbs().maxCoeff(), 1e-14);
            }
        }
    }
}

TEST(Geometry, WeitzenbockConstantAndLinear) {
    const auto m = geom::build_heisenberg(1);
    Vec x(3);
    x << 0.1, 0.2, 0.3;
    const auto con = geom::weitzenbock_residual(m, geom::make_constant(3.0), x, 1.0, 1e-3);
    EXPECT_EQ(con.max_residual, 0.0);
    Vec coeffs(3);
    coeffs << 1.0, 2.0, 3.0;
    const auto lin = geom::weitzenbock_residual(m, geom::make_linear(coeffs), x, 0.7, 1e-3);
    EXPECT_LT(lin.max_residual, 1e-9);
}

TEST(Geometry, WeitzenbockSecondOrderInStep) {
    for (int n : {1, 2}) {
        const auto m = geom::build_heisenberg(n);
        Vec x = Vec::Zero(m.dim());
        for (int i = 0; i < m.dim(); ++i) x(i) = 0.1 * (i + 1);
        for (double eps : {0.5, 1.0}) {
            const auto diag = geom::weitzenbock_step_check(m, geom::make_wavy(), x, eps, 1e-2);
            EXPECT_GT(diag.richardson_ratio, 3.5) << "n=" << n << " eps=" << eps;
            EXPECT_LT(diag.richardson_ratio, 4.5) << "n=" << n << " eps=" << eps;
            EXPECT_FALSE(diag.step_flagged);
        }
    }
}

TEST(Geometry, WeitzenbockEuclideanReducesToFlatIdentity) {
    const auto m = geom::build_euclidean_degenerate(2);
    Vec x(2);
    x << 0.4, -0.3;
    const auto r = geom::weitzenbock_residual(m, geom::make_norm_sq(), x, 1.0, 1e-3);
    EXPECT_LT(r.max_residual, 1e-8);
}

TEST(Geometry, WeitzenbockBadStepFlagged) {
    const auto m = geom::build_heisenberg(1);
    Vec x(3);
    x << 0.1, 0.2, 0.3;
    // far too small: residuals drown in cancellation noise and the ratio is garbage
    const auto diag = geom::weitzenbock_step_check(m, geom::make_wavy(), x, 1.0, 1e-7);
    EXPECT_TRUE(diag.step_flagged);
    EXPECT_THROW(geom::weitzenbock_residual(m, geom::make_wavy(), x, -1.0, 1e-3), UsageError);
    EXPECT_THROW(geom::weitzenbock_residual(m, geom::make_wavy(), x, 1.0, 0.0), UsageError);
}

TEST(Geometry, FrameBasisInvertibleAtRandomPoints) {
    rng::Stream s(15, 0, rng::Purpose::Probe);
    for (int n : {1, 2}) {
        const auto m = geom::build_heisenberg(n);
        for (int rep = 0; rep < 50; ++rep) {
            Vec x(m.dim());
            for (int i = 0; i < m.dim(); ++i) x(i) = 2.0 * s.gaussian();
            const Mat f = m.frame_coefficients(x);
            ASSERT_GT(std::abs(f.determinant()), 1e-9);
        }
    }
}

TEST(Geometry, CovectorEpsNorm) {
    const auto m = geom::build_heisenberg(1);
    geom::CovectorEps eta;
    eta.components = Vec(3);
    eta.components << 0.3, -0.2, 0.7;
    eta.epsilon = 0.5;
    EXPECT_NEAR(eta.norm_sq(m), 0.09 + 0.04 + 0.5 * 0.49, 1e-15);
    EXPECT_GE(eta.norm_sq(m), 0.0);
    eta.epsilon = -1.0;
    EXPECT_THROW(eta.norm_sq(m), UsageError);
}

TEST(Geometry, GroupOps) {
    const auto m = geom::build_heisenberg(1);
    Vec p(3), q(3);
    p << 0.5, -0.3, 0.2;
    q << -0.1, 0.4, -0.6;
    const Vec pq = m.group_mul(p, q);
    EXPECT_NEAR(pq(0), 0.4, 1e-15);
    EXPECT_NEAR(pq(1), 0.1, 1e-15);
    EXPECT_NEAR(pq(2), 0.2 - 0.6 + 0.5 * (0.5 * 0.4 - (-0.3) * (-0.1)), 1e-15);
    const Vec e = m.group_mul(p, m.group_inv(p));
    EXPECT_LT(e.cwiseAbs().maxCoeff(), 1e-15);
    // right translation Jacobian is the exact differential of p -> p * q
    const Mat jac = m.right_translation_jacobian(q);
    const double h = 1e-6;
    for (int c = 0; c < 3; ++c) {
        Vec dp = Vec::Zero(3);
        dp(c) = h;
        const Vec fd = (m.group_mul(p + dp, q) - m.group_mul(p - dp, q)) / (2.0 * h);
        for (int r = 0; r < 3; ++r) ASSERT_NEAR(jac(r, c), fd(r), 1e-9);
    }
}
