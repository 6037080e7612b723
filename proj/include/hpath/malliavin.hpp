#pragma once

#include "hpath/common.hpp"
#include "hpath/cylinder.hpp"
#include "hpath/geometry.hpp"
#include "hpath/parallel.hpp"
#include "hpath/rng.hpp"
#include "hpath/sde.hpp"
#include "hpath/stats.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

// Path-space gradients of cylinder functions and Monte Carlo verification of
// the representation formulas they satisfy.
//
// Both gradients are sums over partition intervals. With suffix sums
//   w_l = sum_{i >= l} tau_{t_i} d_i f,   z_l = sum_{i >= l} Theta_{t_i} d_i f,
// the intrinsic gradient equals z_l on (t_{l-1}, t_l] and the damped gradient
// equals tau_s^{-1} w_l there. Parallel transport of the adapted connection
// is the identity in the left-invariant coframe, so the pairings against
// gamma' and dB need no extra transport factor.

namespace hpath::malliavin {

enum class GradientKind { Intrinsic, Damped };

struct GradientProcess {
    GradientKind kind = GradientKind::Intrinsic;
    double epsilon = 1.0;
    std::vector<Vec> values; // one covector (coframe components) per grid time
};

namespace detail {

// Suffix sums over partition indices: out[l] = sum_{i >= l} mats[idx_i] * difs[i].
inline std::vector<Vec> suffix_sums(const std::vector<Mat>& mats, const std::vector<int>& idx,
                                    const std::vector<Vec>& difs) {
    const int n = static_cast<int>(idx.size());
    std::vector<Vec> out(static_cast<std::size_t>(n));
    Vec acc = Vec::Zero(difs.empty() ? 0 : difs[0].size());
    for (int l = n - 1; l >= 0; --l) {
        acc += mats[static_cast<std::size_t>(idx[static_cast<std::size_t>(l)])] *
               difs[static_cast<std::size_t>(l)];
        out[static_cast<std::size_t>(l)] = acc;
    }
    return out;
}

// Partition interval containing grid cell k (cells [s_k, s_{k+1}) with the
// indicator convention 1_{[0,t_i]}): the active interval l is the smallest
// with k + 1 <= idx_l; returns n when the cell lies beyond t_n.
inline int interval_of_cell(const std::vector<int>& idx, int k) {
    int l = 0;
    while (l < static_cast<int>(idx.size()) && idx[static_cast<std::size_t>(l)] < k + 1) ++l;
    return l;
}

} // namespace detail

inline GradientProcess intrinsic_gradient(const geom::ModelFoliation& model,
                                          const CylinderFunction& f,
                                          const sde::HorizontalPath& path,
                                          const sde::TransportState& transport) {
    const auto& idx = path.grid.partition_indices;
    const auto difs = coframe_differentials(model, f, path);
    const auto z = detail::suffix_sums(transport.theta, idx, difs);
    GradientProcess g;
    g.kind = GradientKind::Intrinsic;
    g.epsilon = transport.epsilon;
    g.values.assign(static_cast<std::size_t>(path.grid.n_steps) + 1, Vec::Zero(model.dim()));
    for (int k = 0; k <= path.grid.n_steps; ++k) {
        // value at time s_k: all terms with t_i >= s_k are active
        int l = 0;
        while (l < static_cast<int>(idx.size()) && idx[static_cast<std::size_t>(l)] < k) ++l;
        if (l < static_cast<int>(idx.size())) {
            g.values[static_cast<std::size_t>(k)] = z[static_cast<std::size_t>(l)];
        }
    }
    return g;
}

inline GradientProcess damped_gradient(const geom::ModelFoliation& model,
                                       const CylinderFunction& f,
                                       const sde::HorizontalPath& path,
                                       const sde::TransportState& transport) {
    const auto& idx = path.grid.partition_indices;
    const auto difs = coframe_differentials(model, f, path);
    const auto w = detail::suffix_sums(transport.tau, idx, difs);

    // regrouping self-check: the grouped suffix form must match the direct
    // double sum at the partition times themselves
    for (std::size_t l = 0; l < idx.size(); ++l) {
        Vec direct = Vec::Zero(model.dim());
        for (std::size_t i = l; i < idx.size(); ++i) {
            direct += transport.tau[static_cast<std::size_t>(idx[i])] * difs[i];
        }
        if ((direct - w[l]).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + direct.cwiseAbs().maxCoeff())) {
            throw NumericalError("damped_gradient: suffix regrouping mismatch");
        }
    }

    GradientProcess g;
    g.kind = GradientKind::Damped;
    g.epsilon = transport.epsilon;
    g.values.assign(static_cast<std::size_t>(path.grid.n_steps) + 1, Vec::Zero(model.dim()));
    for (int k = 0; k <= path.grid.n_steps; ++k) {
        int l = 0;
        while (l < static_cast<int>(idx.size()) && idx[static_cast<std::size_t>(l)] < k) ++l;
        if (l < static_cast<int>(idx.size())) {
            g.values[static_cast<std::size_t>(k)] =
                transport.tau_inv[static_cast<std::size_t>(k)] * w[static_cast<std::size_t>(l)];
        }
    }
    return g;
}

// --- pathwise quadratic functionals used by the inequality checks ---

struct PathFunctionals {
    double value = 0.0;            // F
    double damped_energy = 0.0;    // int_0^T |damped gradient|_eps^2 ds (cellwise quadrature)
    double intrinsic_energy = 0.0; // int_0^T |intrinsic gradient|_eps^2 ds (exact interval sums)
    double partition_sum = 0.0;    // sum_l (dt_l / T) |tau_{t_l}^{-1} w_l|_eps^2
};

inline PathFunctionals path_functionals(const geom::ModelFoliation& model,
                                        const CylinderFunction& f,
                                        const sde::HorizontalPath& path,
                                        const sde::TransportState& transport) {
    const auto& idx = path.grid.partition_indices;
    const auto difs = coframe_differentials(model, f, path);
    const auto w = detail::suffix_sums(transport.tau, idx, difs);
    const auto z = detail::suffix_sums(transport.theta, idx, difs);
    const double eps = transport.epsilon;

    PathFunctionals out;
    out.value = f.value(marginals(f, path));

    int prev = 0;
    for (std::size_t l = 0; l < idx.size(); ++l) {
        const int kl = idx[l];
        const double dt_l = path.grid.time_of(kl) - path.grid.time_of(prev);
        out.intrinsic_energy += dt_l * model.covector_norm_sq(z[l], eps);
        out.partition_sum += (dt_l / path.grid.T) *
            model.covector_norm_sq(transport.tau_inv[static_cast<std::size_t>(kl)] * w[l], eps);
        for (int k = prev; k < kl; ++k) {
            const Vec d = transport.tau_inv[static_cast<std::size_t>(k)] * w[l];
            out.damped_energy += path.grid.dt * model.covector_norm_sq(d, eps);
        }
        prev = kl;
    }
    return out;
}

// E int_0^T <D_s F, D_s G>_eps ds for intrinsic gradients on shared paths.
inline double intrinsic_energy_pairing(const geom::ModelFoliation& model,
                                       const CylinderFunction& f, const CylinderFunction& g,
                                       const sde::HorizontalPath& path,
                                       const sde::TransportState& transport) {
    const auto& idx = path.grid.partition_indices;
    const auto zf = detail::suffix_sums(transport.theta, idx, coframe_differentials(model, f, path));
    const auto zg = detail::suffix_sums(transport.theta, idx, coframe_differentials(model, g, path));
    const Mat geps = model.g_eps_covector(transport.epsilon);
    double total = 0.0;
    int prev = 0;
    for (std::size_t l = 0; l < idx.size(); ++l) {
        const int kl = idx[l];
        const double dt_l = path.grid.time_of(kl) - path.grid.time_of(prev);
        total += dt_l * zf[l].dot(geps * zg[l]);
        prev = kl;
    }
    return total;
}

// --- shared streaming runner ---

struct PathCtx {
    sde::HorizontalPath path;
    sde::TransportState transport;
};

// Streams (index, path, transport) through body with deterministic seeding
// and block-ordered reduction. Set opt.epsilon <= 0 to skip transports.
template <typename Acc, typename Body>
Acc for_each_path(const geom::ModelFoliation& model, const sde::TimeGrid& grid, const Vec& x0,
                  const sde::TransportOptions& opt, std::uint64_t seed, std::uint64_t n_paths,
                  int workers, Body&& body,
                  rng::Purpose purpose = rng::Purpose::Path, std::uint64_t subkey = 0,
                  int path_substeps = 1) {
    const bool want_transport = opt.epsilon > 0.0;
    return parallel::run_with_ctx<Acc>(
        n_paths, workers, [] { return PathCtx{}; },
        [&](std::uint64_t i, Acc& acc, PathCtx& ctx) {
            rng::Stream stream(seed, i, purpose, subkey);
            sde::simulate_path(model, grid, stream, x0, path_substeps, ctx.path);
            if (want_transport) {
                sde::integrate_transport(model, ctx.path, opt, ctx.transport);
            }
            body(i, ctx.path, ctx.transport, acc);
        });
}

// --- integration by parts ---

// Deterministic C^1 variation direction: gamma'(s) as horizontal components.
struct GammaPath {
    std::string key;
    std::function<Vec(double)> derivative;
};

inline GammaPath parse_gamma(const std::string& key, int dim_h) {
    const auto colon = key.find(':');
    const std::string family = key.substr(0, colon);
    const std::vector<double> args =
        colon == std::string::npos ? std::vector<double>{} : detail::parse_args(key.substr(colon + 1));
    auto index = [&](double v) {
        const int i = static_cast<int>(v);
        if (i < 0 || i >= dim_h || static_cast<double>(i) != v) {
            throw UsageError("gamma: horizontal index out of range");
        }
        return i;
    };
    GammaPath g;
    g.key = key;
    if (family == "const") {
        if (args.size() != 1) throw UsageError("gamma const:i expects one index");
        const int i = index(args[0]);
        g.derivative = [i, dim_h](double) {
            Vec v = Vec::Zero(dim_h);
            v(i) = 1.0;
            return v;
        };
    } else if (family == "ramp") {
        if (args.size() != 1) throw UsageError("gamma ramp:i expects one index");
        const int i = index(args[0]);
        g.derivative = [i, dim_h](double s) {
            Vec v = Vec::Zero(dim_h);
            v(i) = s;
            return v;
        };
    } else if (family == "sin") {
        if (args.size() != 2) throw UsageError("gamma sin:i,omega expects two arguments");
        const int i = index(args[0]);
        const double omega = args[1];
        g.derivative = [i, omega, dim_h](double s) {
            Vec v = Vec::Zero(dim_h);
            v(i) = std::sin(omega * s);
            return v;
        };
    } else {
        throw UsageError("unknown gamma family: " + family);
    }
    return g;
}

struct IbpResult {
    stats::EstimatorResult lhs; // E[ F int <gamma', dB> ]
    stats::EstimatorResult rhs; // E[ int <damped gradient, gamma'> ds ]
    double z = 0.0;             // two-sample z-score of the difference
    double z_paired = 0.0;      // paired z-score (same paths), reported for reference
    bool variance_flag = false; // stderr not shrinking like 1/sqrt(N)
};

namespace detail {

struct IbpAcc {
    stats::MeanVar lhs, rhs, diff;
    stats::MeanVar lhs_first_half;
    void merge(const IbpAcc& o) {
        lhs.merge(o.lhs);
        rhs.merge(o.rhs);
        diff.merge(o.diff);
        lhs_first_half.merge(o.lhs_first_half);
    }
};

} // namespace detail

struct IbpTerms {
    double lhs = 0.0; // F * int <gamma', dB>
    double rhs = 0.0; // int <damped gradient, gamma'> ds
};

// Both sides of the integration by parts identity along one path.
inline IbpTerms ibp_terms(const geom::ModelFoliation& model, const sde::TimeGrid& grid,
                          const CylinderFunction& f, const GammaPath& gamma,
                          const sde::HorizontalPath& path, const sde::TransportState& tr) {
    const auto& idx = grid.partition_indices;
    IbpTerms t;
    const double fv = eval_cylinder(f, path);
    double stoch = 0.0;
    for (int k = 0; k < grid.n_steps; ++k) {
        stoch += gamma.derivative(grid.time_of(k)).dot(path.increments.row(k).transpose());
    }
    t.lhs = fv * stoch;

    const auto difs = coframe_differentials(model, f, path);
    const auto w = detail::suffix_sums(tr.tau, idx, difs);
    int prev = 0;
    for (std::size_t l = 0; l < idx.size(); ++l) {
        const int kl = idx[l];
        for (int k = prev; k < kl; ++k) {
            const Vec d = tr.tau_inv[static_cast<std::size_t>(k)] * w[l];
            t.rhs += grid.dt * d.head(model.dim_h).dot(gamma.derivative(grid.time_of(k)));
        }
        prev = kl;
    }
    return t;
}

inline IbpResult ibp_check(const geom::ModelFoliation& model, const sde::TimeGrid& grid,
                           const Vec& x0, const CylinderFunction& f, const GammaPath& gamma,
                           double epsilon, std::uint64_t seed, std::uint64_t n_paths,
                           int workers) {
    sde::TransportOptions opt;
    opt.epsilon = epsilon;
    if (static_cast<int>(grid.partition_indices.size()) != f.n_times) {
        throw UsageError("ibp_check: partition does not match the cylinder function");
    }
    auto acc = for_each_path<detail::IbpAcc>(
        model, grid, x0, opt, seed, n_paths, workers,
        [&](std::uint64_t i, const sde::HorizontalPath& path, const sde::TransportState& tr,
            detail::IbpAcc& a) {
            const IbpTerms t = ibp_terms(model, grid, f, gamma, path, tr);
            a.lhs.add(t.lhs);
            a.rhs.add(t.rhs);
            a.diff.add(t.lhs - t.rhs);
            if (i < n_paths / 2) a.lhs_first_half.add(t.lhs);
        });

    IbpResult r;
    r.lhs = stats::EstimatorResult::from(acc.lhs, seed);
    r.rhs = stats::EstimatorResult::from(acc.rhs, seed);
    r.z = stats::z_score(acc.lhs.mean(), acc.lhs.stderr_mean(), acc.rhs.mean(),
                         acc.rhs.stderr_mean());
    r.z_paired = acc.diff.stderr_mean() > 0.0 ? acc.diff.mean() / acc.diff.stderr_mean() : 0.0;
    // a healthy estimator halves stderr when N quadruples; compare the first
    // half against the full batch (expected ratio 1/sqrt(2))
    if (acc.lhs_first_half.count() > 16) {
        r.variance_flag = acc.lhs.stderr_mean() > 0.92 * acc.lhs_first_half.stderr_mean();
    }
    return r;
}

// --- gradient of the expectation with respect to the starting point ---

struct GradExpectationResult {
    Vec lhs_mean;  // pathwise derivative with common random numbers
    Vec rhs_mean;  // transported-differential estimator
    Vec z;         // per frame direction, paired difference z-scores
    double max_abs_z = 0.0;
};

namespace detail {

struct VecMeanVar {
    std::vector<stats::MeanVar> comps;
    void ensure(int d) {
        if (comps.empty()) comps.resize(static_cast<std::size_t>(d));
    }
    void merge(const VecMeanVar& o) {
        if (o.comps.empty()) return;
        ensure(static_cast<int>(o.comps.size()));
        for (std::size_t c = 0; c < comps.size(); ++c) comps[c].merge(o.comps[c]);
    }
};

struct GradExpAcc {
    VecMeanVar lhs, rhs, diff;
    void merge(const GradExpAcc& o) {
        lhs.merge(o.lhs);
        rhs.merge(o.rhs);
        diff.merge(o.diff);
    }
};

} // namespace detail

inline GradExpectationResult gradient_of_expectation_check(
    const geom::ModelFoliation& model, const sde::TimeGrid& grid, const Vec& x0,
    const CylinderFunction& f, double epsilon, std::uint64_t seed, std::uint64_t n_paths,
    int workers) {
    sde::TransportOptions opt;
    opt.epsilon = epsilon;
    const auto& idx = grid.partition_indices;
    const int d = model.dim();
    const Mat frame0 = model.frame_coefficients(x0);
    const Vec x0_inv = model.group_inv(x0);

    auto acc = for_each_path<detail::GradExpAcc>(
        model, grid, x0, opt, seed, n_paths, workers,
        [&](std::uint64_t, const sde::HorizontalPath& path, const sde::TransportState& tr,
            detail::GradExpAcc& a) {
            a.lhs.ensure(d);
            a.rhs.ensure(d);
            a.diff.ensure(d);
            const auto pts = marginals(f, path);

            // pathwise derivative: X^x = x * X^e, so moving the start along a
            // frame direction moves each marginal by the right-translation
            // Jacobian of the group element x^{-1} X_{t_i}
            Vec lhs = Vec::Zero(d);
            for (int i = 0; i < f.n_times; ++i) {
                const Vec q = model.group_mul(x0_inv, pts[static_cast<std::size_t>(i)]);
                const Mat chain = model.right_translation_jacobian(q) * frame0;
                lhs += chain.transpose() * f.partial(i, pts);
            }

            Vec rhs = Vec::Zero(d);
            const auto difs = coframe_differentials(model, f, path);
            for (int i = 0; i < f.n_times; ++i) {
                rhs += tr.tau[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] *
                       difs[static_cast<std::size_t>(i)];
            }
            for (int c = 0; c < d; ++c) {
                a.lhs.comps[static_cast<std::size_t>(c)].add(lhs(c));
                a.rhs.comps[static_cast<std::size_t>(c)].add(rhs(c));
                a.diff.comps[static_cast<std::size_t>(c)].add(lhs(c) - rhs(c));
            }
        });

    GradExpectationResult r;
    r.lhs_mean = Vec::Zero(d);
    r.rhs_mean = Vec::Zero(d);
    r.z = Vec::Zero(d);
    for (int c = 0; c < d; ++c) {
        r.lhs_mean(c) = acc.lhs.comps[static_cast<std::size_t>(c)].mean();
        r.rhs_mean(c) = acc.rhs.comps[static_cast<std::size_t>(c)].mean();
        const auto& dv = acc.diff.comps[static_cast<std::size_t>(c)];
        r.z(c) = dv.stderr_mean() > 0.0 ? dv.mean() / dv.stderr_mean() : 0.0;
        r.max_abs_z = std::max(r.max_abs_z, std::abs(r.z(c)));
    }
    return r;
}

// --- Clark-Ocone residual for single-time cylinder functions ---

struct ClarkOconeResult {
    stats::EstimatorResult residual_sq; // E[(F - E F - int <kernel, dB>)^2]
    double mean_f = 0.0;
    std::uint64_t n_outer = 0;
    std::uint64_t n_inner = 0;
};

namespace detail {

struct CoAcc {
    stats::MeanVar rsq;
    void merge(const CoAcc& o) { rsq.merge(o.rsq); }
};

} // namespace detail

inline ClarkOconeResult clark_ocone_residual_n1(const geom::ModelFoliation& model,
                                                const sde::TimeGrid& grid, const Vec& x0,
                                                const CylinderFunction& f, double epsilon,
                                                std::uint64_t seed, std::uint64_t n_outer,
                                                std::uint64_t n_inner, int workers,
                                                std::uint64_t n_mean = 20000) {
    if (f.n_times != 1) throw UsageError("clark_ocone_residual_n1: needs a single-time function");
    if (grid.partition_indices.size() != 1 ||
        grid.partition_indices[0] != grid.n_steps) {
        throw UsageError("clark_ocone_residual_n1: partition must be {T}");
    }
    if (n_outer * n_inner > 10'000'000ULL) {
        throw UsageError("clark_ocone_residual_n1: n_outer * n_inner exceeds the budget cap");
    }
    sde::TransportOptions opt;
    opt.epsilon = epsilon;

    // E F on an independent stream
    struct MeanAcc {
        stats::MeanVar f;
        void merge(const MeanAcc& o) { f.merge(o.f); }
    };
    auto mean_acc = for_each_path<MeanAcc>(
        model, grid, x0, sde::TransportOptions{-1.0, 0}, seed, n_mean, workers,
        [&](std::uint64_t, const sde::HorizontalPath& path, const sde::TransportState&,
            MeanAcc& a) { a.f.add(eval_cylinder(f, path)); },
        rng::Purpose::Centering);
    const double f_bar = mean_acc.f.mean();

    auto acc = parallel::run_with_ctx<detail::CoAcc>(
        n_outer, workers,
        [] {
            struct Ctx {
                PathCtx outer;
                PathCtx inner;
            };
            return Ctx{};
        },
        [&](std::uint64_t j, detail::CoAcc& a, auto& ctx) {
            rng::Stream stream(seed, j, rng::Purpose::Path);
            const sde::Increments inc = sde::sample_brownian(model.dim_h, grid, stream);
            sde::integrate_horizontal_bm(model, grid, inc, x0, ctx.outer.path);
            const double fv = eval_cylinder(f, ctx.outer.path);

            double integral = 0.0;
            for (int k = 0; k < grid.n_steps; ++k) {
                // kernel at s_k: restart average of tau over [s_k, T] applied
                // to df at the inner endpoint (Markov + multiplicativity)
                const int steps_left = grid.n_steps - k;
                const sde::TimeGrid inner_grid =
                    sde::TimeGrid::make(grid.dt * steps_left, steps_left);
                const Vec start = ctx.outer.path.state(k);
                Vec kernel = Vec::Zero(model.dim());
                for (std::uint64_t m = 0; m < n_inner; ++m) {
                    rng::Stream inner_stream(seed, j, rng::Purpose::InnerPath,
                                             static_cast<std::uint64_t>(k) * n_inner + m);
                    const sde::Increments iinc =
                        sde::sample_brownian(model.dim_h, inner_grid, inner_stream);
                    sde::integrate_horizontal_bm(model, inner_grid, iinc, start, ctx.inner.path);
                    sde::integrate_transport(model, ctx.inner.path, opt, ctx.inner.transport);
                    const Vec end = ctx.inner.path.state(steps_left);
                    std::vector<Vec> pt{end};
                    const Vec dif = model.coframe_components(end, f.partial(0, pt));
                    kernel += ctx.inner.transport.tau[static_cast<std::size_t>(steps_left)] * dif;
                }
                kernel /= static_cast<double>(n_inner);
                integral += kernel.head(model.dim_h).dot(inc.row(k).transpose());
            }
            const double r = fv - f_bar - integral;
            a.rsq.add(r * r);
        });

    ClarkOconeResult r;
    r.residual_sq = stats::EstimatorResult::from(acc.rsq, seed);
    r.mean_f = f_bar;
    r.n_outer = n_outer;
    r.n_inner = n_inner;
    return r;
}

// --- Dirichlet energy of the intrinsic gradient ---

inline stats::EstimatorResult dirichlet_energy(const geom::ModelFoliation& model,
                                               const sde::TimeGrid& grid, const Vec& x0,
                                               const CylinderFunction& f,
                                               const CylinderFunction& g, double epsilon,
                                               std::uint64_t seed, std::uint64_t n_paths,
                                               int workers) {
    if (f.n_times != static_cast<int>(grid.partition_indices.size()) ||
        g.n_times != static_cast<int>(grid.partition_indices.size())) {
        throw UsageError("dirichlet_energy: both functions must use the common partition");
    }
    sde::TransportOptions opt;
    opt.epsilon = epsilon;
    struct Acc {
        stats::MeanVar e;
        void merge(const Acc& o) { e.merge(o.e); }
    };
    auto acc = for_each_path<Acc>(
        model, grid, x0, opt, seed, n_paths, workers,
        [&](std::uint64_t, const sde::HorizontalPath& path, const sde::TransportState& tr,
            Acc& a) { a.e.add(intrinsic_energy_pairing(model, f, g, path, tr)); });
    return stats::EstimatorResult::from(acc.e, seed);
}

} // namespace hpath::malliavin
