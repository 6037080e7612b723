#pragma once

#include "hpath/common.hpp"
#include "hpath/cylinder.hpp"
#include "hpath/geometry.hpp"
#include "hpath/malliavin.hpp"
#include "hpath/sde.hpp"
#include "hpath/stats.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

// Entropy estimation and the log-Sobolev inequality chain
//
//   Ent(G^2) <= 2 E int |damped grad G|^2
//            <= 2 e^{cT} E[partition sum]
//            <= 2 e^{3cT} E int |intrinsic grad G|^2,      c = K + kappa/eps.
//
// All sides of one chain are estimated on the same path batch in one sweep.
// Statistical PASS convention: lhs <= rhs + 4 combined standard errors.

namespace hpath::functional {

inline constexpr double kSigmaGate = 4.0;
inline constexpr double kEntropyClamp = 1e-12; // |G| floor inside the log

struct EntropyEstimate {
    double ent = 0.0;
    double stderr_ent = 0.0;
    std::uint64_t n = 0;
    std::uint64_t n_clamped = 0;    // samples with |G| < clamp floor
    double clamped_bound = 0.0;     // worst-case |G^2 ln G^2| of a clamped sample
};

namespace detail {

struct ChainAcc {
    stats::MeanVar a;  // G^2 ln G^2 (clamped)
    stats::MeanVar b;  // G^2
    stats::KahanSum ab; // sum of A*B for the delta-method covariance
    stats::MeanVar damped;
    stats::MeanVar partition;
    stats::MeanVar intrinsic;
    std::uint64_t n_clamped = 0;
    void merge(const ChainAcc& o) {
        a.merge(o.a);
        b.merge(o.b);
        ab.merge(o.ab);
        damped.merge(o.damped);
        partition.merge(o.partition);
        intrinsic.merge(o.intrinsic);
        n_clamped += o.n_clamped;
    }
};

inline void accumulate_value(ChainAcc& acc, double g) {
    const double g2 = g * g;
    double a;
    if (std::abs(g) < kEntropyClamp) {
        const double floor2 = kEntropyClamp * kEntropyClamp;
        a = g2 * std::log(floor2);
        ++acc.n_clamped;
    } else {
        a = g2 * std::log(g2);
    }
    acc.a.add(a);
    acc.b.add(g2);
    acc.ab.add(a * g2);
}

inline EntropyEstimate entropy_from(const ChainAcc& acc) {
    EntropyEstimate e;
    e.n = acc.b.count();
    const double b_bar = acc.b.mean();
    if (b_bar <= 0.0) throw NumericalError("entropy: E[G^2] is zero, entropy undefined");
    const double a_bar = acc.a.mean();
    e.ent = a_bar - b_bar * std::log(b_bar);
    // delta method for h(A, B) = A - B ln B: dh/dA = 1, dh/dB = -(ln B + 1)
    const double nn = static_cast<double>(e.n);
    const double cov_ab = e.n > 1
        ? (acc.ab.value() - nn * a_bar * b_bar) / (nn - 1.0)
        : 0.0;
    const double gb = -(std::log(b_bar) + 1.0);
    const double var = acc.a.variance() + gb * gb * acc.b.variance() + 2.0 * gb * cov_ab;
    e.stderr_ent = std::sqrt(std::max(0.0, var) / nn);
    e.n_clamped = acc.n_clamped;
    const double floor2 = kEntropyClamp * kEntropyClamp;
    e.clamped_bound = std::abs(floor2 * std::log(floor2));
    return e;
}

} // namespace detail

struct ChainEstimates {
    EntropyEstimate entropy;
    stats::EstimatorResult damped_energy;    // E int |damped grad|^2
    stats::EstimatorResult partition_sum;    // E sum_l (dt_l/T) |tau_{t_l}^{-1} w_l|^2
    stats::EstimatorResult intrinsic_energy; // E int |intrinsic grad|^2
    double growth = 0.0;                     // e^{T (K + kappa/eps)}
    double full_constant = 0.0;              // 2 e^{3T (K + kappa/eps)}
};

// One sweep with the common path batch; every chain check reads from this.
inline ChainEstimates lsi_chain_estimates(const geom::ModelFoliation& model,
                                          const sde::TimeGrid& grid, const Vec& x0,
                                          const malliavin::CylinderFunction& g, double epsilon,
                                          std::uint64_t seed, std::uint64_t n_paths, int workers) {
    sde::TransportOptions opt;
    opt.epsilon = epsilon;
    auto acc = malliavin::for_each_path<detail::ChainAcc>(
        model, grid, x0, opt, seed, n_paths, workers,
        [&](std::uint64_t, const sde::HorizontalPath& path, const sde::TransportState& tr,
            detail::ChainAcc& a) {
            const auto pf = malliavin::path_functionals(model, g, path, tr);
            detail::accumulate_value(a, pf.value);
            a.damped.add(pf.damped_energy);
            a.partition.add(pf.partition_sum);
            a.intrinsic.add(pf.intrinsic_energy);
        });

    ChainEstimates c;
    c.entropy = detail::entropy_from(acc);
    c.damped_energy = stats::EstimatorResult::from(acc.damped, seed);
    c.partition_sum = stats::EstimatorResult::from(acc.partition, seed);
    c.intrinsic_energy = stats::EstimatorResult::from(acc.intrinsic, seed);
    const double rate = model.bounds.K + model.bounds.kappa / epsilon;
    c.growth = std::exp(grid.T * rate);
    c.full_constant = 2.0 * std::exp(3.0 * grid.T * rate);
    return c;
}

// Standalone entropy estimator (same estimator as the chain's lhs).
inline EntropyEstimate entropy(const geom::ModelFoliation& model, const sde::TimeGrid& grid,
                               const Vec& x0, const malliavin::CylinderFunction& g,
                               std::uint64_t seed, std::uint64_t n_paths, int workers) {
    auto acc = malliavin::for_each_path<detail::ChainAcc>(
        model, grid, x0, sde::TransportOptions{-1.0, 0}, seed, n_paths, workers,
        [&](std::uint64_t, const sde::HorizontalPath& path, const sde::TransportState&,
            detail::ChainAcc& a) {
            detail::accumulate_value(a, malliavin::eval_cylinder(g, path));
        });
    return detail::entropy_from(acc);
}

struct InequalityCheck {
    std::string name;
    double lhs = 0.0;
    double lhs_se = 0.0;
    double rhs = 0.0;
    double rhs_se = 0.0;
    double margin = 0.0;  // (rhs - lhs) / rhs when rhs != 0
    bool equality = false;
    bool pass = false;

    static InequalityCheck of(std::string name, double lhs, double lhs_se, double rhs,
                              double rhs_se) {
        InequalityCheck c;
        c.name = std::move(name);
        c.lhs = lhs;
        c.lhs_se = lhs_se;
        c.rhs = rhs;
        c.rhs_se = rhs_se;
        const double gate = kSigmaGate * std::sqrt(lhs_se * lhs_se + rhs_se * rhs_se);
        c.pass = lhs <= rhs + gate;
        if (rhs == 0.0 && lhs == 0.0) {
            c.equality = true;
            c.margin = 0.0;
        } else if (rhs != 0.0) {
            c.margin = (rhs - lhs) / rhs;
        }
        return c;
    }
};

inline InequalityCheck lsi_damped_check(const ChainEstimates& c) {
    return InequalityCheck::of("lsi-damped", c.entropy.ent, c.entropy.stderr_ent,
                               2.0 * c.damped_energy.mean, 2.0 * c.damped_energy.stderr_mean);
}

// damped energy <= e^{cT} * partition sum
inline InequalityCheck partition_bound_check(const ChainEstimates& c) {
    return InequalityCheck::of("lsi-partition", c.damped_energy.mean,
                               c.damped_energy.stderr_mean, c.growth * c.partition_sum.mean,
                               c.growth * c.partition_sum.stderr_mean);
}

// partition sum <= e^{2cT} * intrinsic energy
inline InequalityCheck intrinsic_bound_check(const ChainEstimates& c) {
    const double g2 = c.growth * c.growth;
    return InequalityCheck::of("lsi-intrinsic", c.partition_sum.mean, c.partition_sum.stderr_mean,
                               g2 * c.intrinsic_energy.mean, g2 * c.intrinsic_energy.stderr_mean);
}

inline InequalityCheck lsi_full_check(const ChainEstimates& c) {
    return InequalityCheck::of("lsi-full", c.entropy.ent, c.entropy.stderr_ent,
                               c.full_constant * c.intrinsic_energy.mean,
                               c.full_constant * c.intrinsic_energy.stderr_mean);
}

// Ordered chain: every adjacent pair must pass at the 4 sigma gate.
inline std::vector<InequalityCheck> lsi_chain_checks(const ChainEstimates& c) {
    std::vector<InequalityCheck> out;
    out.push_back(lsi_damped_check(c));
    out.push_back(InequalityCheck::of("chain-damped-partition", 2.0 * c.damped_energy.mean,
                                      2.0 * c.damped_energy.stderr_mean,
                                      2.0 * c.growth * c.partition_sum.mean,
                                      2.0 * c.growth * c.partition_sum.stderr_mean));
    const double g3 = 2.0 * c.growth * c.growth * c.growth;
    out.push_back(InequalityCheck::of("chain-partition-intrinsic",
                                      2.0 * c.growth * c.partition_sum.mean,
                                      2.0 * c.growth * c.partition_sum.stderr_mean,
                                      g3 * c.intrinsic_energy.mean,
                                      g3 * c.intrinsic_energy.stderr_mean));
    out.push_back(lsi_full_check(c));
    return out;
}

// Pathwise sub-check of the damping-increment estimate used inside the
// partition/intrinsic comparison: for l < i,
//   |(M_{t_l}^{-1} M_{t_i} - M_{t_l}^{-1} M_{t_{i-1}}) z_i|_eps
//     <= (e^{(a/2)(t_i - t_l)} - e^{(a/2)(t_{i-1} - t_l)}) |z_i|_eps,
// with a = K + kappa/eps. Returns the worst relative violation (<= tol holds).
inline double damping_increment_excess(const geom::ModelFoliation& model,
                                       const malliavin::CylinderFunction& f,
                                       const sde::HorizontalPath& path,
                                       const sde::TransportState& tr) {
    const auto& idx = path.grid.partition_indices;
    const auto difs = malliavin::coframe_differentials(model, f, path);
    const auto z = malliavin::detail::suffix_sums(tr.theta, idx, difs);
    const double a = model.bounds.K + model.bounds.kappa / tr.epsilon;
    double worst = -1.0;
    for (std::size_t l = 0; l + 1 < idx.size(); ++l) {
        const Mat m_l_inv = tr.m[static_cast<std::size_t>(idx[l])].inverse();
        const double t_l = path.grid.time_of(idx[l]);
        for (std::size_t i = l + 1; i < idx.size(); ++i) {
            const Mat diff = m_l_inv * (tr.m[static_cast<std::size_t>(idx[i])] -
                                        tr.m[static_cast<std::size_t>(idx[i - 1])]);
            const double lhs =
                std::sqrt(model.covector_norm_sq(diff * z[i], tr.epsilon));
            const double t_i = path.grid.time_of(idx[i]);
            const double t_im1 = path.grid.time_of(idx[i - 1]);
            const double rhs = (std::exp(0.5 * a * (t_i - t_l)) - std::exp(0.5 * a * (t_im1 - t_l))) *
                               std::sqrt(model.covector_norm_sq(z[i], tr.epsilon));
            if (rhs > 0.0) worst = std::max(worst, lhs / rhs - 1.0);
            else worst = std::max(worst, lhs > 1e-14 ? 1.0 : -1.0);
        }
    }
    return worst;
}

} // namespace hpath::functional
