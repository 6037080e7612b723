#pragma once

#include "hpath/common.hpp"
#include "hpath/geometry.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

// Distances from the origin on the model spaces.
//
// Heisenberg geodesics from the identity with rotation parameter lam and
// unit-speed horizontal direction carry the closed-form endpoint map
//   |w(t)| = 2 |sin(lam t / 2)| / |lam|,     z(t) = (lam t - sin lam t) / (2 lam^2),
// so the Carnot-Caratheodory distance reduces to a 1-D root-find in
// theta = lam d / 2 on (0, pi) against mu(theta) = (2 theta - sin 2 theta) / (8 sin^2 theta),
// which is strictly increasing. Points on the z-axis use d = 2 sqrt(pi |z|).
//
// The Riemannian g_eps distance uses the same flow with the extra vertical
// drift eps * lam * t and arc-length normalization s^2 + eps lam^2 = 1; the
// two-point boundary problem is solved by damped Newton over (lam, t) with
// multi-start, cross-checked against r <= d_eps <= d_cc.

namespace hpath::conc {

inline double koranyi_gauge(const geom::ModelFoliation& model, const Vec& p) {
    if (model.heisenberg_n == 0) return p.norm();
    const int n = model.heisenberg_n;
    double r2 = 0.0;
    for (int i = 0; i < 2 * n; ++i) r2 += p(i) * p(i);
    const double z = p(2 * n);
    return std::sqrt(std::sqrt(r2 * r2 + 16.0 * z * z));
}

namespace detail {

// mu(theta) = (2 theta - sin 2 theta) / (8 sin^2 theta) on (0, pi)
inline double cc_mu(double theta) {
    const double s = std::sin(theta);
    return (2.0 * theta - std::sin(2.0 * theta)) / (8.0 * s * s);
}

inline double cc_mu_prime(double theta) {
    const double s = std::sin(theta);
    const double s2 = s * s;
    const double num = 4.0 * s2 * s2 - (2.0 * theta - std::sin(2.0 * theta)) * std::sin(2.0 * theta);
    return num / (8.0 * s2 * s2);
}

// Solve mu(theta) = c for theta in (0, pi); mu is strictly increasing.
inline double cc_solve_theta(double c) {
    if (c <= 0.0) return 0.0;
    double lo = 1e-12;
    double hi = kPi - 1e-12;
    // initial guess from the small/large-c asymptotics
    double theta = c < 0.3 ? std::min(6.0 * c, 1.0) : kPi - std::sqrt(kPi / (4.0 * c));
    theta = std::clamp(theta, lo, hi);
    for (int it = 0; it < 200; ++it) {
        const double g = cc_mu(theta) - c;
        if (g > 0.0) hi = theta;
        else lo = theta;
        const double dg = cc_mu_prime(theta);
        double next = theta - g / dg;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi); // bisection safeguard
        if (std::abs(next - theta) < 1e-13 * (1.0 + theta)) return next;
        theta = next;
    }
    if (hi - lo > 1e-8) {
        throw NumericalError("cc distance root-find did not converge: bracket [" +
                             std::to_string(lo) + ", " + std::to_string(hi) + "], target " +
                             std::to_string(c));
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

// Carnot-Caratheodory distance from the origin.
inline double cc_distance(const geom::ModelFoliation& model, const Vec& p) {
    if (p.size() != model.dim()) throw UsageError("cc_distance: bad point dimension");
    if (model.heisenberg_n == 0) return p.norm();
    const int n = model.heisenberg_n;
    double r2 = 0.0;
    for (int i = 0; i < 2 * n; ++i) r2 += p(i) * p(i);
    const double r = std::sqrt(r2);
    const double z = std::abs(p(2 * n));
    if (z < 1e-15 * (1.0 + r2)) return r;
    if (r < 1e-12) return 2.0 * std::sqrt(kPi * z);
    const double theta = detail::cc_solve_theta(z / r2);
    if (theta < 1e-8) return r * (1.0 + theta * theta / 6.0);
    return r * theta / std::sin(theta);
}

inline double cc_distance_between(const geom::ModelFoliation& model, const Vec& p, const Vec& q) {
    return cc_distance(model, model.group_mul(model.group_inv(p), q));
}

struct EpsDistanceResult {
    double value = 0.0;
    bool converged = false;
    double lower = 0.0; // sandwich fallback interval
    double upper = 0.0;
};

namespace detail {

// Endpoint map of the g_eps Hamiltonian flow from the origin, arc-length
// normalized: returns (r, z) reached at time t with rotation parameter lam.
inline void eps_endpoint(double eps, double lam, double t, double& r, double& z) {
    const double s2 = std::max(0.0, 1.0 - eps * lam * lam);
    const double s = std::sqrt(s2);
    const double lt = lam * t;
    if (std::abs(lam) < 1e-10) {
        r = s * t;
        z = s2 * lam * t * t * t / 12.0 + eps * lt; // first order in lam
        return;
    }
    r = s * 2.0 * std::abs(std::sin(0.5 * lt)) / std::abs(lam);
    z = s2 * (lt - std::sin(lt)) / (2.0 * lam * lam) + eps * lt;
}

} // namespace detail

// Riemannian distance for g_eps from the origin on Heisenberg models
// (Euclidean models: plain norm). Damped Newton over (lam, t), multi-start.
inline EpsDistanceResult riemannian_eps_distance(const geom::ModelFoliation& model, const Vec& p,
                                                 double epsilon) {
    if (epsilon <= 0.0) throw UsageError("riemannian_eps_distance: epsilon must be positive");
    EpsDistanceResult out;
    if (model.heisenberg_n == 0) {
        out.value = p.norm();
        out.converged = true;
        out.lower = out.upper = out.value;
        return out;
    }
    const int n = model.heisenberg_n;
    double r2 = 0.0;
    for (int i = 0; i < 2 * n; ++i) r2 += p(i) * p(i);
    const double r_target = std::sqrt(r2);
    double z_target = p(2 * n);
    const double d_cc = cc_distance(model, p);
    out.lower = r_target;
    out.upper = d_cc;

    if (std::abs(z_target) < 1e-14) { // horizontal straight line stays minimizing
        out.value = r_target;
        out.converged = true;
        return out;
    }
    const double sign = z_target > 0.0 ? 1.0 : -1.0;
    z_target = std::abs(z_target);

    const double lam_max = 1.0 / std::sqrt(epsilon);
    double best = std::numeric_limits<double>::infinity();

    auto try_start = [&](double lam0, double t0) {
        double lam = lam0;
        double t = t0;
        for (int it = 0; it < 80; ++it) {
            double r, z;
            detail::eps_endpoint(epsilon, lam, t, r, z);
            const double fr = r - r_target;
            const double fz = z - z_target;
            if (std::abs(fr) < 1e-11 * (1.0 + r_target) && std::abs(fz) < 1e-11 * (1.0 + z_target)) {
                if (t > 0.0 && t < best) best = t;
                return;
            }
            // finite-difference Jacobian of the endpoint map
            const double hl = 1e-7 * (1.0 + std::abs(lam));
            const double ht = 1e-7 * (1.0 + std::abs(t));
            double r1, z1, r2v, z2v;
            detail::eps_endpoint(epsilon, lam + hl, t, r1, z1);
            detail::eps_endpoint(epsilon, lam, t + ht, r2v, z2v);
            const double j11 = (r1 - r) / hl, j12 = (r2v - r) / ht;
            const double j21 = (z1 - z) / hl, j22 = (z2v - z) / ht;
            const double det = j11 * j22 - j12 * j21;
            if (std::abs(det) < 1e-14) return;
            double dlam = (-fr * j22 + fz * j12) / det;
            double dt = (-j11 * fz + j21 * fr) / det;
            // damping: keep iterates inside the admissible box
            double step = 1.0;
            for (int back = 0; back < 30; ++back) {
                const double lam_n = lam + step * dlam;
                const double t_n = t + step * dt;
                if (t_n > 1e-10 && std::abs(lam_n) < lam_max * (1.0 - 1e-12) &&
                    std::abs(lam_n * t_n) < 2.0 * kPi) {
                    double rn, zn;
                    detail::eps_endpoint(epsilon, lam_n, t_n, rn, zn);
                    const double f_old = fr * fr + fz * fz;
                    const double f_new = (rn - r_target) * (rn - r_target) +
                                         (zn - z_target) * (zn - z_target);
                    if (f_new < f_old) {
                        lam = lam_n;
                        t = t_n;
                        break;
                    }
                }
                step *= 0.5;
                if (back == 29) return; // line search failed
            }
        }
    };

    const std::vector<double> lam_fracs{0.02, 0.1, 0.25, 0.45, 0.65, 0.8, 0.9, 0.97};
    const std::vector<double> t_starts{std::max(r_target, 1e-3), d_cc,
                                       0.5 * (r_target + d_cc), 1.5 * d_cc};
    for (double fl : lam_fracs) {
        for (double t0 : t_starts) try_start(fl * lam_max, t0);
    }

    if (std::isfinite(best)) {
        out.value = best;
        out.converged = true;
        // clip tiny solver overshoots of the sandwich
        out.value = std::min(std::max(out.value, out.lower), out.upper * (1.0 + 1e-9));
    } else {
        out.value = 0.5 * (out.lower + out.upper);
        out.converged = false;
    }
    (void)sign;
    return out;
}

// Distance kinds selectable in the tail pipelines.
enum class DistanceKind { CC, RiemannianEps, Koranyi };

struct DistanceModel {
    DistanceKind kind = DistanceKind::CC;
    double epsilon = 1.0; // for RiemannianEps
    // Koranyi gauge sandwich constants relative to d_cc: c1 * gauge <= d_cc <= c2 * gauge.
    double c1 = 1.0;
    double c2 = std::sqrt(kPi);
    bool enforce_sandwich = false;

    double evaluate(const geom::ModelFoliation& model, const Vec& p) const {
        switch (kind) {
            case DistanceKind::CC: {
                const double d = cc_distance(model, p);
                if (enforce_sandwich && model.heisenberg_n > 0) {
                    const double g = koranyi_gauge(model, p);
                    if (d < c1 * g * (1.0 - 1e-9) || d > c2 * g * (1.0 + 1e-9)) {
                        throw NumericalError("cc distance violates the Koranyi sandwich");
                    }
                }
                return d;
            }
            case DistanceKind::RiemannianEps:
                return riemannian_eps_distance(model, p, epsilon).value;
            case DistanceKind::Koranyi:
                return koranyi_gauge(model, p);
        }
        throw UsageError("unknown distance kind");
    }

    // Exact upper bound used to prune sup evaluations. On Heisenberg,
    // (x, y, z) = (x, y, 0) * (0, 0, z), so the triangle inequality gives
    // d_cc <= r + 2 sqrt(pi |z|); the gauge sandwich d_cc <= c2 * gauge holds
    // as well, and d_eps <= d_cc.
    double upper_bound(const geom::ModelFoliation& model, const Vec& p) const {
        if (model.heisenberg_n == 0) return p.norm();
        const int n = model.heisenberg_n;
        double r2 = 0.0;
        for (int i = 0; i < 2 * n; ++i) r2 += p(i) * p(i);
        const double split = std::sqrt(r2) + 2.0 * std::sqrt(kPi * std::abs(p(2 * n)));
        return std::min(split, c2 * koranyi_gauge(model, p));
    }

    // Exact cheap lower bound: the gauge for CC (sandwich with c1 = 1) and
    // the horizontal projection for the Riemannian family.
    double lower_bound(const geom::ModelFoliation& model, const Vec& p) const {
        if (model.heisenberg_n == 0) return p.norm();
        if (kind == DistanceKind::RiemannianEps) {
            const int n = model.heisenberg_n;
            double r2 = 0.0;
            for (int i = 0; i < 2 * n; ++i) r2 += p(i) * p(i);
            return std::sqrt(r2);
        }
        return c1 * koranyi_gauge(model, p);
    }
};

// Estimates the gauge sandwich constants by dense sampling of d_cc / gauge
// over a grid of directions and scales.
struct SandwichEstimate {
    double c1 = 0.0;
    double c2 = 0.0;
};

inline SandwichEstimate estimate_koranyi_sandwich(const geom::ModelFoliation& model,
                                                  int n_radial = 24, int n_vertical = 24) {
    if (model.heisenberg_n == 0) throw UsageError("sandwich: Heisenberg models only");
    SandwichEstimate s;
    s.c1 = std::numeric_limits<double>::infinity();
    s.c2 = 0.0;
    for (int i = 0; i <= n_radial; ++i) {
        for (int j = 0; j <= n_vertical; ++j) {
            const double r = 1.5 * static_cast<double>(i) / n_radial;
            const double z = -0.8 + 1.6 * static_cast<double>(j) / n_vertical;
            if (r < 1e-12 && std::abs(z) < 1e-12) continue;
            Vec p = Vec::Zero(model.dim());
            p(0) = r;
            p(model.dim() - 1) = z;
            const double ratio = cc_distance(model, p) / koranyi_gauge(model, p);
            s.c1 = std::min(s.c1, ratio);
            s.c2 = std::max(s.c2, ratio);
        }
    }
    return s;
}

} // namespace hpath::conc
