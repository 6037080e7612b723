#pragma once

#include "hpath/common.hpp"
#include "hpath/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

// Model totally geodesic foliations with globally left-invariant frames:
// Heisenberg groups H^n and a degenerate Euclidean control model.
//
// Conventions (fixed across the library):
//  * Points are exponential coordinates. For H^n the order is
//    (x_1..x_n, y_1..y_n, z); frames are
//      X_i = d/dx_i - (y_i/2) d/dz,  Y_i = d/dy_i + (x_i/2) d/dz,  Z = d/dz.
//  * All covectors and transport matrices are stored as component vectors /
//    matrices in the coframe dual to (horizontal frame, vertical frame).
//  * The dual g_eps norm on covector components is
//      |eta|_eps^2 = sum_h eta_i^2 + eps * sum_v eta_a^2,
//    i.e. vertical covector components carry weight eps (dual to the 1/eps
//    scaling of vertical vectors).
//  * On these models the connection adapted to the splitting makes the
//    left-invariant frame parallel, so parallel transport is the identity in
//    frame components and the transport SDEs have constant coefficients.

namespace hpath::geom {

struct CurvatureBounds {
    double K = 0.0;              // Ricci lower-bound constant, >= 0
    double kappa = 0.0;          // torsion-map bound, > 0
    std::optional<double> rho2;  // trace bound used by the tail estimates
};

// Smooth scalar test function with exact first derivatives in coordinates.
struct TestFunction {
    std::string name;
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient; // coordinate partials
};

class ModelFoliation {
public:
    std::string name;
    int dim_h = 0;
    int dim_v = 0;
    int heisenberg_n = 0; // 0 for the Euclidean model
    CurvatureBounds bounds;

    // torsion[a](i, j) = g_V(V_a, T(E_i, E_j)) for horizontal frame indices
    // i, j; antisymmetric in (i, j). Constant for group models.
    std::vector<Mat> torsion;

    // Ricci map on horizontal covector components (zero for both models).
    Mat ricci_h;

    int dim() const { return dim_h + dim_v; }

    // Columns are coordinate components of the frame vectors at x.
    Mat frame_coefficients(const Vec& x) const {
        Mat f = Mat::Identity(dim(), dim());
        if (heisenberg_n > 0) {
            const int n = heisenberg_n;
            const int zrow = 2 * n;
            for (int i = 0; i < n; ++i) {
                f(zrow, i) = -0.5 * x(n + i);  // X_i column
                f(zrow, n + i) = 0.5 * x(i);   // Y_i column
            }
        }
        return f;
    }

    // Coframe components of df at x from exact coordinate partials:
    // eta_a = E_a f = sum_c frame(c, a) * df/dx_c.
    Vec coframe_components(const Vec& x, const Vec& coordinate_gradient) const {
        return frame_coefficients(x).transpose() * coordinate_gradient;
    }

    // J_Z on the horizontal space, Z given in vertical frame components:
    // (J_Z)(i, j) = sum_a Z_a T^a(E_j, E_i).
    Mat j_matrix_vertical(const Vec& z_vertical) const {
        Mat j = Mat::Zero(dim_h, dim_h);
        for (int a = 0; a < dim_v; ++a) {
            j += z_vertical(a) * torsion[static_cast<std::size_t>(a)].transpose();
        }
        return j;
    }

    // J^2 = sum_a J_{V_a} J_{V_a} over a vertical orthonormal frame.
    Mat jsq() const {
        Mat s = Mat::Zero(dim_h, dim_h);
        for (int a = 0; a < dim_v; ++a) {
            Vec e = Vec::Zero(dim_v);
            e(a) = 1.0;
            const Mat j = j_matrix_vertical(e);
            s += j * j;
        }
        return s;
    }

    // Dual metric weights on covector components.
    Mat g_eps_covector(double epsilon) const {
        Mat g = Mat::Identity(dim(), dim());
        for (int a = dim_h; a < dim(); ++a) g(a, a) = epsilon;
        return g;
    }

    double covector_norm_sq(const Vec& eta, double epsilon) const {
        double s = 0.0;
        for (int i = 0; i < dim_h; ++i) s += eta(i) * eta(i);
        for (int a = dim_h; a < dim(); ++a) s += epsilon * eta(a) * eta(a);
        return s;
    }

    // Generators of the transport equations in the coframe. For a horizontal
    // frame direction E_i the map eta -> T^eps_{E_i} eta has matrix A_i with
    //   A_i(j, dim_h + a)      = -T^a(E_i, E_j)        (horizontal rows)
    //   A_i(dim_h + a, j)      = (1/eps) T^a(E_i, E_j) (vertical rows)
    // Each A_i is skew-symmetric for the dual g_eps metric.
    std::vector<Mat> transport_generators(double epsilon) const {
        std::vector<Mat> gens;
        gens.reserve(static_cast<std::size_t>(dim_h));
        for (int i = 0; i < dim_h; ++i) {
            Mat a_i = Mat::Zero(dim(), dim());
            for (int a = 0; a < dim_v; ++a) {
                for (int j = 0; j < dim_h; ++j) {
                    const double t = torsion[static_cast<std::size_t>(a)](i, j);
                    a_i(j, dim_h + a) = -t;
                    a_i(dim_h + a, j) = t / epsilon;
                }
            }
            gens.push_back(std::move(a_i));
        }
        return gens;
    }

    // Drift operator (1/eps) J^2 + Ric on covector components, embedded into
    // the full coframe (vertical block zero).
    Mat transport_drift(double epsilon) const {
        Mat r = Mat::Zero(dim(), dim());
        r.topLeftCorner(dim_h, dim_h) = jsq() / epsilon + ricci_h;
        return r;
    }

    bool has_torsion() const {
        for (const auto& t : torsion) {
            if (t.cwiseAbs().maxCoeff() > 0.0) return true;
        }
        return false;
    }

    // --- group structure (exponential coordinates) ---

    Vec group_mul(const Vec& p, const Vec& q) const {
        if (heisenberg_n == 0) return p + q;
        const int n = heisenberg_n;
        Vec r = p + q;
        double area = 0.0;
        for (int i = 0; i < n; ++i) {
            area += p(i) * q(n + i) - p(n + i) * q(i);
        }
        r(2 * n) += 0.5 * area;
        return r;
    }

    Vec group_inv(const Vec& p) const { return -p; }

    // Jacobian of p -> p * q (constant in p: the product is affine in p).
    Mat right_translation_jacobian(const Vec& q) const {
        Mat jac = Mat::Identity(dim(), dim());
        if (heisenberg_n > 0) {
            const int n = heisenberg_n;
            for (int i = 0; i < n; ++i) {
                jac(2 * n, i) = 0.5 * q(n + i);
                jac(2 * n, n + i) = -0.5 * q(i);
            }
        }
        return jac;
    }
};

// Covector with an attached metric parameter; the dual g_eps norm weights
// vertical components by eps.
struct CovectorEps {
    Vec components;
    double epsilon = 1.0;

    double norm_sq(const ModelFoliation& model) const {
        if (epsilon <= 0.0) throw UsageError("CovectorEps: epsilon must be positive");
        return model.covector_norm_sq(components, epsilon);
    }
};

inline ModelFoliation build_heisenberg(int n) {
    if (n < 1) throw UsageError("build_heisenberg: n must be >= 1");
    if (2 * n + 1 > kMaxDim) throw UsageError("build_heisenberg: n too large for kMaxDim");
    ModelFoliation m;
    m.name = "heisenberg-" + std::to_string(n);
    m.heisenberg_n = n;
    m.dim_h = 2 * n;
    m.dim_v = 1;
    Mat t = Mat::Zero(m.dim_h, m.dim_h);
    for (int i = 0; i < n; ++i) {
        t(i, n + i) = -1.0; // T(X_i, Y_i) = -Z
        t(n + i, i) = 1.0;
    }
    m.torsion.push_back(std::move(t));
    m.ricci_h = Mat::Zero(m.dim_h, m.dim_h);
    m.bounds.K = 0.0;
    m.bounds.kappa = 1.0;
    m.bounds.rho2 = static_cast<double>(n) / 2.0;
    return m;
}

// Degenerate control model: no vertical directions, all transports identity.
// kappa is stored as a tiny positive floor so eps-dependent formulas stay
// well-defined; the resulting bounds are then trivially loose.
inline constexpr double kKappaFloor = 1e-12;

inline ModelFoliation build_euclidean_degenerate(int d) {
    if (d < 1) throw UsageError("build_euclidean_degenerate: d must be >= 1");
    if (d > kMaxDim) throw UsageError("build_euclidean_degenerate: d too large for kMaxDim");
    ModelFoliation m;
    m.name = "euclidean-" + std::to_string(d);
    m.heisenberg_n = 0;
    m.dim_h = d;
    m.dim_v = 0;
    m.ricci_h = Mat::Zero(d, d);
    m.bounds.K = 0.0;
    m.bounds.kappa = kKappaFloor;
    m.bounds.rho2 = std::nullopt;
    return m;
}

inline ModelFoliation build_model(const std::string& name) {
    auto parse_suffix = [&](const std::string& prefix) -> std::optional<int> {
        if (name.rfind(prefix, 0) != 0) return std::nullopt;
        const std::string tail = name.substr(prefix.size());
        if (tail.empty()) return std::nullopt;
        for (char c : tail) {
            if (c < '0' || c > '9') return std::nullopt;
        }
        return std::stoi(tail);
    };
    if (auto n = parse_suffix("heisenberg-")) return build_heisenberg(*n);
    if (auto d = parse_suffix("euclidean-")) return build_euclidean_degenerate(*d);
    throw UsageError("unknown model name: " + name +
                     " (expected heisenberg-N or euclidean-D)");
}

// J_Z for a full tangent vector Z in frame components. Z must be vertical.
inline Mat j_endomorphism(const ModelFoliation& m, const Vec& z_full) {
    if (z_full.size() != m.dim()) throw UsageError("j_endomorphism: bad vector length");
    for (int i = 0; i < m.dim_h; ++i) {
        if (z_full(i) != 0.0) {
            throw UsageError("j_endomorphism: Z has horizontal components");
        }
    }
    return m.j_matrix_vertical(z_full.tail(m.dim_v));
}

// Directional derivative of a vector-valued function along frame direction
// E_j at x, by central differences along the frozen frame vector.
template <typename F>
Vec frame_directional_fd(const ModelFoliation& m, const F& fn, const Vec& x, int j, double h) {
    const Vec dir = m.frame_coefficients(x).col(j);
    const Vec fp = fn(x + h * dir);
    const Vec fm = fn(x - h * dir);
    return (fp - fm) / (2.0 * h);
}

// Max norm of delta_H T(X_k) = sum_j (nabla_{X_j} T)(X_j, X_k) over the
// sampled points and horizontal directions k. In the left-invariant frame
// the connection coefficients vanish, so the covariant derivative reduces to
// frame derivatives of the torsion coefficients (finite differences).
inline double yang_mills_check(const ModelFoliation& m, const std::vector<Vec>& points,
                               double h = 1e-3) {
    double max_residual = 0.0;
    for (const Vec& x : points) {
        for (int k = 0; k < m.dim_h; ++k) {
            Vec residual = Vec::Zero(m.dim_v);
            for (int j = 0; j < m.dim_h; ++j) {
                auto torsion_jk = [&](const Vec& y) -> Vec {
                    (void)y; // constant structure coefficients on group models
                    Vec t(m.dim_v);
                    for (int a = 0; a < m.dim_v; ++a) {
                        t(a) = m.torsion[static_cast<std::size_t>(a)](j, k);
                    }
                    return t;
                };
                residual += frame_directional_fd(m, torsion_jk, x, j, h);
            }
            max_residual = std::max(max_residual, residual.norm());
        }
    }
    return max_residual;
}

struct WeitzenbockResult {
    Vec d_lap_f;       // coframe components of d(Lf) at x
    Vec box_df;        // coframe components of the one-form operator applied to df
    Vec residual;      // componentwise |difference|
    double max_residual = 0.0;
};

namespace detail {

// Lf = sum_i X_i(X_i f); the inner derivative is exact, the outer one FD.
inline double horizontal_laplacian_fd(const ModelFoliation& m, const TestFunction& f,
                                      const Vec& x, double h) {
    double lf = 0.0;
    for (int i = 0; i < m.dim_h; ++i) {
        auto xi_f = [&](const Vec& y) -> Vec {
            Vec r(1);
            r(0) = m.frame_coefficients(y).col(i).dot(f.gradient(y));
            return r;
        };
        lf += frame_directional_fd(m, xi_f, x, i, h)(0);
    }
    return lf;
}

} // namespace detail

// Componentwise residual of the commutation identity between d(Lf) and the
// one-form operator built from the eps-connection, J^2 and Ric. Both sides
// are evaluated in the coframe with nested central differences of step h on
// top of the exact first derivatives of f.
inline WeitzenbockResult weitzenbock_residual(const ModelFoliation& m, const TestFunction& f,
                                              const Vec& x, double epsilon, double h) {
    if (epsilon <= 0.0) throw UsageError("weitzenbock_residual: epsilon must be positive");
    if (h <= 0.0) throw UsageError("weitzenbock_residual: step must be positive");
    const int d = m.dim();
    const auto gens = m.transport_generators(epsilon);

    // left side: coframe components of d(Lf)
    auto lap = [&](const Vec& y) -> Vec {
        Vec r(1);
        r(0) = detail::horizontal_laplacian_fd(m, f, y, h);
        return r;
    };
    Vec d_lap(d);
    for (int a = 0; a < d; ++a) {
        d_lap(a) = frame_directional_fd(m, lap, x, a, h)(0);
    }

    // right side: sum_i D'_i D'_i eta - (1/eps) J^2 eta - Ric eta with
    // D'_i = X_i - A_i acting on coframe components of eta = df.
    auto eta = [&](const Vec& y) -> Vec { return m.coframe_components(y, f.gradient(y)); };
    Vec rough = Vec::Zero(d);
    for (int i = 0; i < m.dim_h; ++i) {
        auto first = [&](const Vec& y) -> Vec {
            return frame_directional_fd(m, eta, y, i, h) - gens[static_cast<std::size_t>(i)] * eta(y);
        };
        rough += frame_directional_fd(m, first, x, i, h) - gens[static_cast<std::size_t>(i)] * first(x);
    }
    Vec box = rough - m.transport_drift(epsilon) * eta(x);

    WeitzenbockResult res;
    res.d_lap_f = d_lap;
    res.box_df = box;
    res.residual = (d_lap - box).cwiseAbs();
    res.max_residual = res.residual.maxCoeff();
    return res;
}

struct StepDiagnostics {
    double residual_h = 0.0;
    double residual_half = 0.0;
    double richardson_ratio = 0.0;
    bool step_flagged = false; // cancellation (too small) or truncation (too large)
};

// Runs the residual at h and h/2; second-order convergence means the ratio
// sits near 4. Ratios far outside that window flag a bad step choice.
inline StepDiagnostics weitzenbock_step_check(const ModelFoliation& m, const TestFunction& f,
                                              const Vec& x, double epsilon, double h) {
    StepDiagnostics diag;
    diag.residual_h = weitzenbock_residual(m, f, x, epsilon, h).max_residual;
    diag.residual_half = weitzenbock_residual(m, f, x, epsilon, h / 2.0).max_residual;
    diag.richardson_ratio =
        diag.residual_half > 0.0 ? diag.residual_h / diag.residual_half : 0.0;
    diag.step_flagged = diag.residual_half > 1e-14 &&
                        (diag.richardson_ratio < 2.5 || diag.richardson_ratio > 6.0);
    return diag;
}

// Random-probe validation of the curvature/torsion bounds carried by the
// model. Returns the worst signed violation (<= 0 when all hold).
inline double validate_bounds(const ModelFoliation& m, int n_probes, rng::Stream& stream) {
    double worst = -std::numeric_limits<double>::infinity();
    const Mat jsq = m.jsq();
    for (int p = 0; p < n_probes; ++p) {
        Vec eta(m.dim_h);
        for (int i = 0; i < m.dim_h; ++i) eta(i) = stream.gaussian();
        const double n2 = eta.squaredNorm();
        // <Ric eta, eta> >= -K |eta|^2
        worst = std::max(worst, -m.bounds.K * n2 - eta.dot(m.ricci_h * eta));
        // -<J^2 eta, eta> <= kappa |eta|^2
        worst = std::max(worst, -eta.dot(jsq * eta) - m.bounds.kappa * n2);
        if (m.bounds.rho2 && m.dim_v > 0) {
            Vec z(m.dim_v);
            for (int a = 0; a < m.dim_v; ++a) z(a) = stream.gaussian();
            const Mat jz = m.j_matrix_vertical(z);
            const double tr = (jz * jz).trace();
            // -(1/4) Tr_H(J_Z^2) >= rho2 |Z|^2
            worst = std::max(worst, *m.bounds.rho2 * z.squaredNorm() + 0.25 * tr);
        }
    }
    return worst;
}

// Small registry of smooth test functions with exact gradients, used by the
// geometry checks and the finite-difference self-tests.
inline TestFunction make_constant(double c) {
    return {"const", [c](const Vec&) { return c; },
            [](const Vec& x) { return Vec(Vec::Zero(x.size())); }};
}

inline TestFunction make_linear(const Vec& coeffs) {
    return {"linear", [coeffs](const Vec& x) { return coeffs.dot(x); },
            [coeffs](const Vec&) { return coeffs; }};
}

inline TestFunction make_norm_sq() {
    return {"norm-sq", [](const Vec& x) { return x.squaredNorm(); },
            [](const Vec& x) { return Vec(2.0 * x); }};
}

// sin(x_0) cos(x_1) exp(0.3 x_last): non-polynomial, smooth, all derivatives
// bounded on compacts; drives the Richardson convergence check.
inline TestFunction make_wavy() {
    auto val = [](const Vec& x) {
        const double a = x(0);
        const double b = x.size() > 1 ? x(1) : 0.0;
        const double c = x(x.size() - 1);
        return std::sin(a) * std::cos(b) * std::exp(0.3 * c);
    };
    auto grad = [](const Vec& x) {
        const double a = x(0);
        const double b = x.size() > 1 ? x(1) : 0.0;
        const double c = x(x.size() - 1);
        const double e = std::exp(0.3 * c);
        Vec g = Vec::Zero(x.size());
        g(0) += std::cos(a) * std::cos(b) * e;
        if (x.size() > 1) g(1) -= std::sin(a) * std::sin(b) * e;
        g(x.size() - 1) += 0.3 * std::sin(a) * std::cos(b) * e;
        return g;
    };
    return {"wavy", val, grad};
}

} // namespace hpath::geom
