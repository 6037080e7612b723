#pragma once

#include "hpath/common.hpp"
#include "hpath/geometry.hpp"
#include "hpath/rng.hpp"
#include "hpath/timegrid.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

// Horizontal Brownian motion and the coupled transport processes.
//
// Integrators (all Stratonovich-consistent predictor-corrector / Heun):
//  * path:      X_{k+1} = X_k + (1/2)(F(X_k) + F(X*)) dB,  X* the Euler predictor.
//    On Heisenberg this reproduces the horizontal coordinates exactly and the
//    vertical coordinate as the midpoint-rule discrete Levy area.
//  * rotation:  Theta_{k+1} = Theta_k (I - S + S^2/2), S = sum_i A_i dB_i.
//    The per-step isometry defect is O(|S|^4), so the accumulated residual is
//    first order in dt.
//  * damping:   M advanced by an implicit midpoint step of
//    dM/dt = -(1/2) M W with W = Theta_mid R Theta_mid^{-1}.
//
// The transport equations are refined on an internal subgrid (piecewise
// linear increments) when eps is small; see TransportOptions.

namespace hpath::sde {

using Increments = Eigen::MatrixXd; // n_steps x dim_h
using States = Eigen::MatrixXd;     // (n_steps + 1) x dim

struct HorizontalPath {
    TimeGrid grid;
    Increments increments;
    States states;

    Vec state(int k) const { return states.row(k).transpose(); }
};

inline void sample_brownian(int dim_h, const TimeGrid& grid, rng::Stream& stream,
                            Increments& out) {
    out.resize(grid.n_steps, dim_h);
    const double sd = std::sqrt(grid.dt);
    for (int k = 0; k < grid.n_steps; ++k) {
        for (int i = 0; i < dim_h; ++i) out(k, i) = sd * stream.gaussian();
    }
}

inline Increments sample_brownian(int dim_h, const TimeGrid& grid, rng::Stream& stream) {
    Increments inc;
    sample_brownian(dim_h, grid, stream, inc);
    return inc;
}

inline void integrate_horizontal_bm(const geom::ModelFoliation& model, const TimeGrid& grid,
                                    const Increments& increments, const Vec& x0,
                                    HorizontalPath& out) {
    if (increments.rows() != grid.n_steps || increments.cols() != model.dim_h) {
        throw UsageError("integrate_horizontal_bm: increments do not match grid/model");
    }
    if (x0.size() != model.dim()) {
        throw UsageError("integrate_horizontal_bm: start point has wrong dimension");
    }
    out.grid = grid;
    out.increments = increments;
    out.states.resize(grid.n_steps + 1, model.dim());
    out.states.row(0) = x0.transpose();

    if (model.heisenberg_n > 0) {
        // The predictor-corrector step in closed form: horizontal coordinates
        // integrate exactly, the vertical one picks up the midpoint-rule area.
        const int n = model.heisenberg_n;
        double z = x0(2 * n);
        for (int k = 0; k < grid.n_steps; ++k) {
            for (int i = 0; i < n; ++i) {
                const double dbx = increments(k, i);
                const double dby = increments(k, n + i);
                const double x_old = out.states(k, i);
                const double y_old = out.states(k, n + i);
                out.states(k + 1, i) = x_old + dbx;
                out.states(k + 1, n + i) = y_old + dby;
                z += 0.5 * ((x_old + 0.5 * dbx) * dby - (y_old + 0.5 * dby) * dbx);
            }
            out.states(k + 1, 2 * n) = z;
        }
        return;
    }
    if (!model.has_torsion()) { // flat model: plain cumulative sums
        for (int k = 0; k < grid.n_steps; ++k) {
            for (int c = 0; c < model.dim(); ++c) {
                out.states(k + 1, c) = out.states(k, c) + increments(k, c);
            }
        }
        return;
    }
    Vec x = x0;
    for (int k = 0; k < grid.n_steps; ++k) {
        const auto db = increments.row(k).transpose();
        const Mat f0 = model.frame_coefficients(x);
        const Vec pred = x + f0.leftCols(model.dim_h) * db;
        const Mat f1 = model.frame_coefficients(pred);
        x += 0.5 * (f0.leftCols(model.dim_h) + f1.leftCols(model.dim_h)) * db;
        out.states.row(k + 1) = x.transpose();
    }
}

inline HorizontalPath integrate_horizontal_bm(const geom::ModelFoliation& model,
                                              const TimeGrid& grid,
                                              const Increments& increments, const Vec& x0) {
    HorizontalPath p;
    integrate_horizontal_bm(model, grid, increments, x0, p);
    return p;
}

// Samples increments and integrates the path, optionally on a finer internal
// grid (path_substeps > 1): states are recorded at the reported grid points
// and the recorded increments are the sums of the fine ones. This is the
// accuracy knob for the area-type vertical coordinate; default off.
inline void simulate_path(const geom::ModelFoliation& model, const TimeGrid& grid,
                          rng::Stream& stream, const Vec& x0, int path_substeps,
                          HorizontalPath& out) {
    if (path_substeps <= 1) {
        Increments inc;
        sample_brownian(model.dim_h, grid, stream, inc);
        integrate_horizontal_bm(model, grid, inc, x0, out);
        return;
    }
    const TimeGrid fine = TimeGrid::make(grid.T, grid.n_steps * path_substeps);
    Increments fine_inc;
    sample_brownian(model.dim_h, fine, stream, fine_inc);
    HorizontalPath fine_path;
    integrate_horizontal_bm(model, fine, fine_inc, x0, fine_path);
    out.grid = grid;
    out.increments.resize(grid.n_steps, model.dim_h);
    out.states.resize(grid.n_steps + 1, model.dim());
    out.states.row(0) = fine_path.states.row(0);
    for (int k = 0; k < grid.n_steps; ++k) {
        for (int c = 0; c < model.dim_h; ++c) {
            double sum = 0.0;
            for (int q = 0; q < path_substeps; ++q) {
                sum += fine_inc(k * path_substeps + q, c);
            }
            out.increments(k, c) = sum;
        }
        out.states.row(k + 1) = fine_path.states.row((k + 1) * path_substeps);
    }
}

struct TransportOptions {
    double epsilon = 1.0;
    int substeps = 0; // 0 = auto: max(1, ceil(1/eps)) when the model has torsion
};

inline int resolve_substeps(const geom::ModelFoliation& model, const TransportOptions& opt) {
    if (opt.substeps > 0) return opt.substeps;
    if (!model.has_torsion()) return 1;
    return std::max(1, static_cast<int>(std::ceil(1.0 / opt.epsilon - 1e-9)));
}

struct TransportState {
    double epsilon = 1.0;
    bool all_identity = false;
    std::vector<Mat> theta;
    std::vector<Mat> m;
    std::vector<Mat> tau;
    std::vector<Mat> tau_inv;

    int n_times() const { return static_cast<int>(theta.size()); }
};

namespace detail {

// Fixed-dimension integration core; the compile-time size keeps the small
// matrix algebra fully unrolled.
template <int D>
void integrate_transport_core(const geom::ModelFoliation& model, const HorizontalPath& path,
                              const TransportOptions& opt, TransportState& out) {
    using MatD = std::conditional_t<D == Eigen::Dynamic, Mat, Eigen::Matrix<double, D, D>>;
    const int d = model.dim();
    const int n = path.grid.n_steps;
    const auto gens_dyn = model.transport_generators(opt.epsilon);
    std::vector<MatD> gens(gens_dyn.size());
    for (std::size_t i = 0; i < gens.size(); ++i) gens[i] = gens_dyn[i];
    const MatD r_drift = model.transport_drift(opt.epsilon);
    const int sub = resolve_substeps(model, opt);
    const double h_sub = path.grid.dt / static_cast<double>(sub);
    const MatD id = Mat::Identity(d, d);

    MatD theta = id;
    MatD m = id;
    MatD s = id, theta_next = id, theta_mid = id, w = id, tau = id, tau_inv = id;
    for (int k = 0; k < n; ++k) {
        s.setZero();
        for (int i = 0; i < model.dim_h; ++i) {
            s += (path.increments(k, i) / static_cast<double>(sub)) *
                 gens[static_cast<std::size_t>(i)];
        }
        for (int q = 0; q < sub; ++q) {
            theta_next.noalias() = theta * (id - s + 0.5 * s * s);
            theta_mid = 0.5 * (theta + theta_next);
            w.noalias() = theta_mid * r_drift * theta_mid.inverse();
            // implicit midpoint for dM/dt = -(1/2) M W
            const MatD num = id - 0.25 * h_sub * w;
            const MatD den_inv = (id + 0.25 * h_sub * w).inverse();
            m = m * num * den_inv;
            theta = theta_next;
        }
        tau.noalias() = m * theta;
        tau_inv = tau.inverse();
        if (!tau_inv.allFinite()) {
            throw NumericalError("integrate_transport: transport matrix became singular");
        }
        out.theta[static_cast<std::size_t>(k + 1)] = theta;
        out.m[static_cast<std::size_t>(k + 1)] = m;
        out.tau[static_cast<std::size_t>(k + 1)] = tau;
        out.tau_inv[static_cast<std::size_t>(k + 1)] = tau_inv;
    }
}

inline void transport_buffers_reset(TransportState& out, int d, int n) {
    const Mat id = Mat::Identity(d, d);
    const std::size_t want = static_cast<std::size_t>(n) + 1;
    if (out.theta.size() != want || out.theta[0].rows() != d) {
        out.theta.assign(want, id);
        out.m.assign(want, id);
        out.tau.assign(want, id);
        out.tau_inv.assign(want, id);
    } else {
        out.theta[0] = id;
        out.m[0] = id;
        out.tau[0] = id;
        out.tau_inv[0] = id;
    }
}

} // namespace detail

inline void integrate_transport(const geom::ModelFoliation& model, const HorizontalPath& path,
                                const TransportOptions& opt, TransportState& out) {
    if (opt.epsilon <= 0.0) throw UsageError("integrate_transport: epsilon must be positive");
    const int d = model.dim();
    const int n = path.grid.n_steps;
    out.epsilon = opt.epsilon;

    const bool trivial = !model.has_torsion() && model.ricci_h.cwiseAbs().maxCoeff() == 0.0;
    if (trivial) { // flat control model: all transports stay Id
        const std::size_t want = static_cast<std::size_t>(n) + 1;
        if (!(out.all_identity && out.theta.size() == want && out.theta[0].rows() == d)) {
            const Mat id = Mat::Identity(d, d);
            out.theta.assign(want, id);
            out.m.assign(want, id);
            out.tau.assign(want, id);
            out.tau_inv.assign(want, id);
            out.all_identity = true;
        }
        return;
    }

    out.all_identity = false;
    detail::transport_buffers_reset(out, d, n);
    switch (d) {
        case 3: detail::integrate_transport_core<3>(model, path, opt, out); break;
        case 5: detail::integrate_transport_core<5>(model, path, opt, out); break;
        case 7: detail::integrate_transport_core<7>(model, path, opt, out); break;
        default: detail::integrate_transport_core<Eigen::Dynamic>(model, path, opt, out); break;
    }
}

inline TransportState integrate_transport(const geom::ModelFoliation& model,
                                          const HorizontalPath& path,
                                          const TransportOptions& opt) {
    TransportState st;
    integrate_transport(model, path, opt, st);
    return st;
}

// Independent cross-check: one-shot Heun integration of the full transport
// equation (rotation and damping combined) without the M/Theta split.
inline std::vector<Mat> integrate_transport_direct(const geom::ModelFoliation& model,
                                                   const HorizontalPath& path,
                                                   const TransportOptions& opt) {
    if (opt.epsilon <= 0.0) throw UsageError("integrate_transport_direct: epsilon must be positive");
    const int d = model.dim();
    const int n = path.grid.n_steps;
    std::vector<Mat> tau(static_cast<std::size_t>(n) + 1, Mat::Identity(d, d));
    const auto gens = model.transport_generators(opt.epsilon);
    const Mat r_drift = model.transport_drift(opt.epsilon);
    const int sub = resolve_substeps(model, opt);
    const double h_sub = path.grid.dt / static_cast<double>(sub);
    const Mat id = Mat::Identity(d, d);

    Mat t = id;
    Mat g(d, d);
    for (int k = 0; k < n; ++k) {
        g.setZero();
        for (int i = 0; i < model.dim_h; ++i) {
            g += (path.increments(k, i) / static_cast<double>(sub)) *
                 gens[static_cast<std::size_t>(i)];
        }
        g += 0.5 * h_sub * r_drift;
        for (int q = 0; q < sub; ++q) {
            const Mat pred = t * (id - g);
            t = t - 0.5 * (t + pred) * g;
        }
        tau[static_cast<std::size_t>(k + 1)] = t;
    }
    return tau;
}

// Operator norm of a coframe matrix mapping (R^d, |.|_eps) to itself.
inline double eps_operator_norm(const geom::ModelFoliation& model, const Mat& a, double epsilon) {
    const int d = model.dim();
    Vec w(d);
    for (int i = 0; i < d; ++i) w(i) = i < model.dim_h ? 1.0 : std::sqrt(epsilon);
    Mat b(d, d);
    for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) b(r, c) = w(r) * a(r, c) / w(c);
    }
    if (d == 1) return std::abs(b(0, 0));
    const Mat btb = b.transpose() * b;
    if (d == 2) {
        Eigen::Matrix2d m2 = btb.topLeftCorner<2, 2>();
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es;
        es.computeDirect(m2, Eigen::EigenvaluesOnly);
        return std::sqrt(es.eigenvalues().maxCoeff());
    }
    if (d == 3) {
        Eigen::Matrix3d m3 = btb.topLeftCorner<3, 3>();
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
        es.computeDirect(m3, Eigen::EigenvaluesOnly);
        return std::sqrt(es.eigenvalues().maxCoeff());
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(btb, Eigen::EigenvaluesOnly);
    return std::sqrt(es.eigenvalues().maxCoeff());
}

inline double transport_growth_bound(const geom::CurvatureBounds& b, double epsilon, double t) {
    return std::exp(0.5 * (b.K + b.kappa / epsilon) * t);
}

// Largest relative excess of |tau_t|_eps over the growth bound along one
// transported path; <= 0 means the pathwise bound holds everywhere.
inline double transport_bound_excess(const geom::ModelFoliation& model,
                                     const TransportState& st, const TimeGrid& grid) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= grid.n_steps; ++k) {
        const double norm = eps_operator_norm(model, st.tau[static_cast<std::size_t>(k)], st.epsilon);
        const double bound = transport_growth_bound(model.bounds, st.epsilon, grid.time_of(k));
        worst = std::max(worst, norm / bound - 1.0);
    }
    return worst;
}

// Same excess for the damping factor alone.
inline double damping_bound_excess(const geom::ModelFoliation& model, const TransportState& st,
                                   const TimeGrid& grid) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= grid.n_steps; ++k) {
        const double norm = eps_operator_norm(model, st.m[static_cast<std::size_t>(k)], st.epsilon);
        const double bound = transport_growth_bound(model.bounds, st.epsilon, grid.time_of(k));
        worst = std::max(worst, norm / bound - 1.0);
    }
    return worst;
}

// max_k | Theta_k^T G_eps Theta_k - G_eps |_F along one path.
inline double isometry_residual(const geom::ModelFoliation& model, const TransportState& st) {
    const Mat g = model.g_eps_covector(st.epsilon);
    double worst = 0.0;
    for (const Mat& th : st.theta) {
        worst = std::max(worst, (th.transpose() * g * th - g).norm());
    }
    return worst;
}

// max_k | tau_k - M_k Theta_k |; zero by construction up to roundoff.
inline double factorization_residual(const TransportState& st) {
    double worst = 0.0;
    for (std::size_t k = 0; k < st.tau.size(); ++k) {
        worst = std::max(worst, (st.tau[k] - st.m[k] * st.theta[k]).cwiseAbs().maxCoeff());
    }
    return worst;
}

// --- binary dump (versioned, little-endian) ---
//
// Header: magic "HPATHDMP", u32 version, u32 kind (1 = paths, 2 = transports),
// u32 model-name length + bytes, u64 seed, f64 epsilon, f64 dt, f64 T,
// u64 n_paths, u64 n_steps, u32 dim, u32 dim_h. Payload rows are row-major
// 64-bit floats: per path, increments then states (kind 1), or the transport
// matrix at every grid time (kind 2).

struct DumpHeader {
    std::uint32_t version = 1;
    std::uint32_t kind = 1;
    std::string model_name;
    std::uint64_t seed = 0;
    double epsilon = 0.0;
    double dt = 0.0;
    double T = 0.0;
    std::uint64_t n_paths = 0;
    std::uint64_t n_steps = 0;
    std::uint32_t dim = 0;
    std::uint32_t dim_h = 0;
};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "dump format is little-endian; big-endian hosts are unsupported");

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

} // namespace detail

inline void write_dump_header(std::ostream& os, const DumpHeader& h) {
    os.write("HPATHDMP", 8);
    detail::write_pod(os, h.version);
    detail::write_pod(os, h.kind);
    detail::write_pod(os, static_cast<std::uint32_t>(h.model_name.size()));
    os.write(h.model_name.data(), static_cast<std::streamsize>(h.model_name.size()));
    detail::write_pod(os, h.seed);
    detail::write_pod(os, h.epsilon);
    detail::write_pod(os, h.dt);
    detail::write_pod(os, h.T);
    detail::write_pod(os, h.n_paths);
    detail::write_pod(os, h.n_steps);
    detail::write_pod(os, h.dim);
    detail::write_pod(os, h.dim_h);
}

inline DumpHeader read_dump_header(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "HPATHDMP", 8) != 0) {
        throw UsageError("dump file has wrong magic");
    }
    DumpHeader h;
    h.version = detail::read_pod<std::uint32_t>(is);
    if (h.version != 1) throw UsageError("unsupported dump version");
    h.kind = detail::read_pod<std::uint32_t>(is);
    const auto len = detail::read_pod<std::uint32_t>(is);
    h.model_name.resize(len);
    is.read(h.model_name.data(), len);
    h.seed = detail::read_pod<std::uint64_t>(is);
    h.epsilon = detail::read_pod<double>(is);
    h.dt = detail::read_pod<double>(is);
    h.T = detail::read_pod<double>(is);
    h.n_paths = detail::read_pod<std::uint64_t>(is);
    h.n_steps = detail::read_pod<std::uint64_t>(is);
    h.dim = detail::read_pod<std::uint32_t>(is);
    h.dim_h = detail::read_pod<std::uint32_t>(is);
    if (!is) throw UsageError("dump header truncated");
    return h;
}

inline void append_path_payload(std::ostream& os, const HorizontalPath& p) {
    for (int k = 0; k < p.increments.rows(); ++k) {
        for (int i = 0; i < p.increments.cols(); ++i) detail::write_pod(os, p.increments(k, i));
    }
    for (int k = 0; k < p.states.rows(); ++k) {
        for (int c = 0; c < p.states.cols(); ++c) detail::write_pod(os, p.states(k, c));
    }
}

inline void append_transport_payload(std::ostream& os, const TransportState& st) {
    for (const Mat& t : st.tau) {
        for (int r = 0; r < t.rows(); ++r) {
            for (int c = 0; c < t.cols(); ++c) detail::write_pod(os, t(r, c));
        }
    }
}

inline void read_path_payload(std::istream& is, const DumpHeader& h, HorizontalPath& p) {
    p.grid = TimeGrid::make(h.T, static_cast<int>(h.n_steps));
    p.increments.resize(static_cast<int>(h.n_steps), static_cast<int>(h.dim_h));
    p.states.resize(static_cast<int>(h.n_steps) + 1, static_cast<int>(h.dim));
    for (int k = 0; k < p.increments.rows(); ++k) {
        for (int i = 0; i < p.increments.cols(); ++i) {
            p.increments(k, i) = detail::read_pod<double>(is);
        }
    }
    for (int k = 0; k < p.states.rows(); ++k) {
        for (int c = 0; c < p.states.cols(); ++c) p.states(k, c) = detail::read_pod<double>(is);
    }
    if (!is) throw UsageError("dump payload truncated");
}

} // namespace hpath::sde
