#pragma once

#include "hpath/common.hpp"
#include "hpath/concentration.hpp"
#include "hpath/cylinder.hpp"
#include "hpath/distance.hpp"
#include "hpath/functional.hpp"
#include "hpath/geometry.hpp"
#include "hpath/malliavin.hpp"
#include "hpath/rng.hpp"
#include "hpath/sde.hpp"
#include "hpath/stats.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

// Experiment harness: flat key-value configs, a named-check registry, and
// JSON/CSV result persistence. Exit code convention: 0 = pass/complete,
// 1 = statistical FAIL, 2 = usage error.

namespace hpath::harness {

using Json = nlohmann::ordered_json;

struct ExperimentConfig {
    std::string check;
    std::string model = "heisenberg-1";
    std::vector<double> epsilon{1.0};
    double T = 1.0;
    double dt = 1e-3;
    std::uint64_t n_paths = 10000;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string function = "coord:0";
    std::string function2;
    std::string gamma = "const:0";
    std::vector<double> times; // partition times; defaults to {T}
    std::vector<double> x0;    // start point; defaults to the origin
    std::string output;
    int workers = 1;
    int substeps = 0;
    int path_substeps = 1;
    std::uint64_t n_inner = 4;
    std::uint64_t n_outer = 256;
    std::vector<double> r_grid;
    std::vector<double> dt_ladder;
    std::string dump_paths;
    std::string dump_transports;

    bool operator==(const ExperimentConfig&) const = default;
};

// --- flat key-value config format ---

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        std::size_t pos = 0;
        out.push_back(std::stod(item, &pos));
        if (pos != item.size()) throw UsageError("bad numeric list entry: " + item);
    }
    return out;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += format_double(v[i]);
    }
    return s;
}

} // namespace detail

inline void apply_key_raw(ExperimentConfig& c, const std::string& key, const std::string& value) {
    if (key == "check") c.check = value;
    else if (key == "model") c.model = value;
    else if (key == "epsilon") c.epsilon = detail::parse_list(value);
    else if (key == "T") c.T = std::stod(value);
    else if (key == "dt") c.dt = std::stod(value);
    else if (key == "n_paths") c.n_paths = std::stoull(value);
    else if (key == "seed") { c.seed = std::stoull(value); c.seed_set = true; }
    else if (key == "function") c.function = value;
    else if (key == "function2") c.function2 = value;
    else if (key == "gamma") c.gamma = value;
    else if (key == "times") c.times = detail::parse_list(value);
    else if (key == "x0") c.x0 = detail::parse_list(value);
    else if (key == "output") c.output = value;
    else if (key == "workers") c.workers = std::stoi(value);
    else if (key == "substeps") c.substeps = std::stoi(value);
    else if (key == "path_substeps") c.path_substeps = std::stoi(value);
    else if (key == "n_inner") c.n_inner = std::stoull(value);
    else if (key == "n_outer") c.n_outer = std::stoull(value);
    else if (key == "r_grid") c.r_grid = detail::parse_list(value);
    else if (key == "dt_ladder") c.dt_ladder = detail::parse_list(value);
    else if (key == "dump_paths") c.dump_paths = value;
    else if (key == "dump_transports") c.dump_transports = value;
    else throw UsageError("unknown config key: " + key);
}

inline void apply_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
    try {
        apply_key_raw(c, key, value);
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception&) {
        throw UsageError("bad value for config key " + key + ": " + value);
    }
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig c;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError("config line missing '=': " + line);
        apply_key(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return c;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

inline std::string serialize_config(const ExperimentConfig& c) {
    std::string s;
    auto kv = [&](const std::string& k, const std::string& v) {
        if (!v.empty()) s += k + " = " + v + "\n";
    };
    kv("check", c.check);
    kv("model", c.model);
    kv("epsilon", detail::format_list(c.epsilon));
    kv("T", detail::format_double(c.T));
    kv("dt", detail::format_double(c.dt));
    kv("n_paths", std::to_string(c.n_paths));
    if (c.seed_set) kv("seed", std::to_string(c.seed));
    kv("function", c.function);
    kv("function2", c.function2);
    kv("gamma", c.gamma);
    kv("times", detail::format_list(c.times));
    kv("x0", detail::format_list(c.x0));
    kv("output", c.output);
    kv("workers", std::to_string(c.workers));
    kv("substeps", std::to_string(c.substeps));
    kv("path_substeps", std::to_string(c.path_substeps));
    kv("n_inner", std::to_string(c.n_inner));
    kv("n_outer", std::to_string(c.n_outer));
    kv("r_grid", detail::format_list(c.r_grid));
    kv("dt_ladder", detail::format_list(c.dt_ladder));
    kv("dump_paths", c.dump_paths);
    kv("dump_transports", c.dump_transports);
    return s;
}

// --- shared setup helpers ---

struct Setup {
    geom::ModelFoliation model;
    sde::TimeGrid grid;
    Vec x0;
    double epsilon = 1.0;
};

inline void validate_common(const ExperimentConfig& c) {
    if (!c.seed_set) throw UsageError("seed is required (no silent nondeterminism)");
    if (c.T <= 0.0) throw UsageError("T must be positive");
    if (c.dt <= 0.0) throw UsageError("dt must be positive");
    if (c.n_paths == 0) throw UsageError("n_paths must be positive");
    if (c.workers < 1) throw UsageError("workers must be >= 1");
    if (c.path_substeps < 1) throw UsageError("path_substeps must be >= 1");
    for (double e : c.epsilon) {
        if (e <= 0.0) throw UsageError("epsilon must be positive");
    }
}

inline Setup make_setup(const ExperimentConfig& c, bool need_single_epsilon = true) {
    validate_common(c);
    Setup s;
    s.model = geom::build_model(c.model);
    const double steps_raw = c.T / c.dt;
    const int steps = static_cast<int>(std::llround(steps_raw));
    if (steps < 1 || std::abs(steps_raw - steps) > 1e-9) {
        throw UsageError("T must be an integer multiple of dt");
    }
    s.grid = sde::TimeGrid::make(c.T, steps);
    if (!c.times.empty()) s.grid.set_partition(c.times);
    else s.grid.set_partition({c.T});
    if (c.x0.empty()) {
        s.x0 = Vec::Zero(s.model.dim());
    } else {
        if (static_cast<int>(c.x0.size()) != s.model.dim()) {
            throw UsageError("x0 has wrong dimension for model " + c.model);
        }
        s.x0 = Vec::Zero(s.model.dim());
        for (int i = 0; i < s.model.dim(); ++i) s.x0(i) = c.x0[static_cast<std::size_t>(i)];
    }
    if (need_single_epsilon) {
        if (c.epsilon.size() != 1) {
            throw UsageError("this check takes a single epsilon (use sweep for lists)");
        }
        s.epsilon = c.epsilon[0];
    }
    return s;
}

struct CheckOutcome {
    bool pass = true;
    Json summary;
    std::vector<std::string> csv_lines; // header first when present
};

// --- individual checks ---

namespace checks {

inline CheckOutcome geometry(const ExperimentConfig& cfg) {
    const Setup s = make_setup(cfg);
    const auto& m = s.model;
    CheckOutcome out;

    // exact skew-symmetry of J_Z over random vertical probes
    rng::Stream probe(cfg.seed, 0, rng::Purpose::Probe);
    double max_skew = 0.0;
    double max_linearity = 0.0;
    for (int rep = 0; rep < 100 && m.dim_v > 0; ++rep) {
        Vec z(m.dim_v);
        for (int a = 0; a < m.dim_v; ++a) z(a) = probe.gaussian();
        const Mat j = m.j_matrix_vertical(z);
        max_skew = std::max(max_skew, (j + j.transpose()).cwiseAbs().maxCoeff());
        const Mat j2 = m.j_matrix_vertical(2.0 * z);
        max_linearity = std::max(max_linearity, (j2 - 2.0 * j).cwiseAbs().maxCoeff());
    }

    // Yang-Mills residual over sampled points
    std::vector<Vec> pts;
    for (int rep = 0; rep < 16; ++rep) {
        Vec x(m.dim());
        for (int i = 0; i < m.dim(); ++i) x(i) = probe.gaussian();
        pts.push_back(x);
    }
    const double ym = geom::yang_mills_check(m, pts);

    const double bounds_excess = geom::validate_bounds(m, 1000, probe);

    // commutation identity: exact for linear data, second order for smooth
    Vec x_eval = Vec::Zero(m.dim());
    for (int i = 0; i < m.dim(); ++i) x_eval(i) = 0.1 * (i + 1);
    Vec lin_coeffs = Vec::Zero(m.dim());
    for (int i = 0; i < m.dim(); ++i) lin_coeffs(i) = 1.0 + 0.5 * i;
    const auto lin = geom::weitzenbock_residual(m, geom::make_linear(lin_coeffs), x_eval,
                                                s.epsilon, 1e-3);
    const auto con = geom::weitzenbock_residual(m, geom::make_constant(2.5), x_eval,
                                                s.epsilon, 1e-3);
    const auto diag = geom::weitzenbock_step_check(m, geom::make_wavy(), x_eval, s.epsilon, 1e-2);

    const bool pass = max_skew == 0.0 && max_linearity < 1e-12 && ym < 1e-10 &&
                      bounds_excess <= 1e-9 && lin.max_residual < 1e-9 &&
                      con.max_residual == 0.0 && diag.richardson_ratio >= 3.5 &&
                      diag.richardson_ratio <= 4.5 && !diag.step_flagged;

    out.pass = pass;
    out.summary["j_skew_max"] = max_skew;
    out.summary["j_linearity_max"] = max_linearity;
    out.summary["yang_mills_residual"] = ym;
    out.summary["bounds_excess"] = bounds_excess;
    out.summary["weitzenbock_linear_residual"] = lin.max_residual;
    out.summary["weitzenbock_constant_residual"] = con.max_residual;
    out.summary["weitzenbock_residual_h"] = diag.residual_h;
    out.summary["weitzenbock_residual_h_half"] = diag.residual_half;
    out.summary["richardson_ratio"] = diag.richardson_ratio;
    return out;
}

inline CheckOutcome brownian_moments(const ExperimentConfig& cfg) {
    const Setup s = make_setup(cfg);
    struct Acc {
        stats::MeanVar inc;   // pooled increments (first coordinate)
        stats::MeanVar cross; // product of the first two coordinates
        void merge(const Acc& o) {
            inc.merge(o.inc);
            cross.merge(o.cross);
        }
    };
    auto acc = parallel::run<Acc>(cfg.n_paths, cfg.workers, [&](std::uint64_t i, Acc& a) {
        rng::Stream stream(cfg.seed, i, rng::Purpose::Path);
        const auto inc = sde::sample_brownian(s.model.dim_h, s.grid, stream);
        for (int k = 0; k < s.grid.n_steps; ++k) {
            a.inc.add(inc(k, 0));
            if (s.model.dim_h > 1) a.cross.add(inc(k, 0) * inc(k, 1));
        }
    });
    const double n = static_cast<double>(acc.inc.count());
    const double mean_z = acc.inc.mean() / acc.inc.stderr_mean();
    const double var = acc.inc.variance();
    const double var_se = s.grid.dt * std::sqrt(2.0 / (n - 1.0));
    const double var_z = (var - s.grid.dt) / var_se;
    double cross_z = 0.0;
    if (acc.cross.count() > 0) cross_z = acc.cross.mean() / acc.cross.stderr_mean();
    CheckOutcome out;
    out.pass = std::abs(mean_z) < 4.0 && std::abs(var_z) < 4.0 && std::abs(cross_z) < 4.0;
    out.summary["increment_mean_z"] = mean_z;
    out.summary["increment_variance"] = var;
    out.summary["increment_variance_z"] = var_z;
    out.summary["cross_correlation_z"] = cross_z;
    return out;
}

struct TransportAcc {
    double max_excess = -1e300;
    double max_damping_excess = -1e300;
    double max_isometry = 0.0;
    double max_factorization = 0.0;
    std::uint64_t violating_paths = 0;
    void merge(const TransportAcc& o) {
        max_excess = std::max(max_excess, o.max_excess);
        max_damping_excess = std::max(max_damping_excess, o.max_damping_excess);
        max_isometry = std::max(max_isometry, o.max_isometry);
        max_factorization = std::max(max_factorization, o.max_factorization);
        violating_paths += o.violating_paths;
    }
};

inline TransportAcc transport_batch(const Setup& s, const ExperimentConfig& cfg, double dt_override) {
    sde::TimeGrid grid = s.grid;
    if (dt_override > 0.0) {
        grid = sde::TimeGrid::make(s.grid.T, static_cast<int>(std::llround(s.grid.T / dt_override)));
    }
    sde::TransportOptions opt;
    opt.epsilon = s.epsilon;
    opt.substeps = cfg.substeps;
    const double tol = 10.0 * grid.dt;
    return malliavin::for_each_path<TransportAcc>(
        s.model, grid, s.x0, opt, cfg.seed, cfg.n_paths, cfg.workers,
        [&](std::uint64_t, const sde::HorizontalPath&, const sde::TransportState& tr,
            TransportAcc& a) {
            const double excess = sde::transport_bound_excess(s.model, tr, grid);
            a.max_excess = std::max(a.max_excess, excess);
            a.max_damping_excess =
                std::max(a.max_damping_excess, sde::damping_bound_excess(s.model, tr, grid));
            a.max_isometry = std::max(a.max_isometry, sde::isometry_residual(s.model, tr));
            a.max_factorization =
                std::max(a.max_factorization, sde::factorization_residual(tr));
            if (excess > tol) ++a.violating_paths;
        },
        rng::Purpose::Path, 0, cfg.path_substeps);
}

inline CheckOutcome transport_bound(const ExperimentConfig& cfg) {
    const Setup s = make_setup(cfg);
    const auto acc = transport_batch(s, cfg, -1.0);
    CheckOutcome out;
    out.pass = acc.violating_paths == 0;
    out.summary["bound_constant"] = sde::transport_growth_bound(s.model.bounds, s.epsilon, s.grid.T);
    out.summary["max_relative_excess"] = acc.max_excess;
    out.summary["max_damping_excess"] = acc.max_damping_excess;
    out.summary["violating_paths"] = acc.violating_paths;
    out.summary["tolerance"] = 10.0 * s.grid.dt;
    out.summary["max_isometry_residual"] = acc.max_isometry;
    out.summary["max_factorization_residual"] = acc.max_factorization;
    return out;
}

inline CheckOutcome isometry(const ExperimentConfig& cfg) {
    const Setup s = make_setup(cfg);
    const auto full = transport_batch(s, cfg, -1.0);
    const auto half = transport_batch(s, cfg, s.grid.dt / 2.0);
    const double ratio = half.max_isometry > 0.0 ? full.max_isometry / half.max_isometry : 0.0;
    CheckOutcome out;
    const bool trivially_exact = full.max_isometry < 1e-13;
    out.pass = trivially_exact ||
               (full.max_isometry < 5.0 * s.grid.dt && ratio > 1.4 && ratio < 2.8);
    out.summary["residual"] = full.max_isometry;
    out.summary["residual_half_dt"] = half.max_isometry;
    out.summary["halving_ratio"] = ratio;
    out.summary["exact_zero"] = trivially_exact;
    return out;
}

inline CheckOutcome tau_consistency(const ExperimentConfig& cfg) {
    const Setup s = make_setup(cfg);
    sde::TransportOptions opt;
    opt.epsilon = s.epsilon;
    opt.substeps = cfg.substeps;
    struct Acc {
        double max_fact = 0.0;
        double max_direct = 0.0;
        void merge(const Acc& o) {
            max_fact = std::max(max_fact, o.max_fact);
            max_direct = std::max(max_direct, o.max_direct);
        }
    };
    auto acc = malliavin::for_each_path<Acc>(
        s.model, s.grid, s.x0, opt, cfg.seed, cfg.n_paths, cfg.workers,
        [&](std::uint64_t, const sde::HorizontalPath& path, const sde::TransportState& tr,
            Acc& a) {
            a.max_fact = std::max(a.max_fact, sde::factorization_residual(tr));
            const auto direct = sde::integrate_transport_direct(s.model, path, opt);
            for (std::size_t k = 0; k < direct.size(); ++k) {
                a.max_direct = std::max(
                    a.max_direct, (direct[k] - tr.tau[k]).cwiseAbs().maxCoeff());
            }
        });
    const double growth = sde::transport_growth_bound(s.model.bounds, s.epsilon, s.grid.T);
    const double direct_rate = acc.max_direct / s.grid.dt; // the measured C in C * dt
    CheckOutcome out;
    out.pass = acc.max_fact < 1e-10 && acc.max_direct < 100.0 * s.grid.dt * growth;
    out.summary["factorization_residual"] = acc.max_fact;
    out.summary["direct_integration_residual"] = acc.max_direct;
    out.summary["direct_residual_per_dt"] = direct_rate;
    return out;
}

inline CheckOutcome ibp(const ExperimentConfig& cfg) {
    const Setup s = make_setup(cfg);
    const auto f = malliavin::parse_cylinder_function(cfg.function, s.model.dim());
    const auto gamma = malliavin::parse_gamma(cfg.gamma, s.model.dim_h);
    const auto r = malliavin::ibp_check(s.model, s.grid, s.x0, f, gamma, s.epsilon, cfg.seed,
                                        cfg.n_paths, cfg.workers);
    CheckOutcome out;
    out.pass = std::abs(r.z) < 4.0 && !r.variance_flag;
    out.summary["lhs"] = r.lhs.mean;
    out.summary["lhs_se"] = r.lhs.stderr_mean;
    out.summary["rhs"] = r.rhs.mean;
    out.summary["rhs_se"] = r.rhs.stderr_mean;
    out.summary["z"] = r.z;
    out.summary["z_paired"] = r.z_paired;
    out.summary["variance_flag"] = r.variance_flag;
    return out;
}

inline CheckOutcome grad_expectation(const ExperimentConfig& cfg) {
    const Setup s = make_setup(cfg);
    const auto f = malliavin::parse_cylinder_function(cfg.function, s.model.dim());
    const auto r = malliavin::gradient_of_expectation_check(s.model, s.grid, s.x0, f, s.epsilon,
                                                            cfg.seed, cfg.n_paths, cfg.workers);
    CheckOutcome out;
    out.pass = r.max_abs_z < 4.0;
    out.summary["max_abs_z"] = r.max_abs_z;
    Json lhs = Json::array();
    Json rhs = Json::array();
    Json z = Json::array();
    for (int c = 0; c < r.lhs_mean.size(); ++c) {
        lhs.push_back(r.lhs_mean(c));
        rhs.push_back(r.rhs_mean(c));
        z.push_back(r.z(c));
    }
    out.summary["lhs_mean"] = lhs;
    out.summary["rhs_mean"] = rhs;
    out.summary["component_z"] = z;
    return out;
}

inline CheckOutcome clark_ocone(const ExperimentConfig& cfg) {
    const Setup s = make_setup(cfg);
    const auto f = malliavin::parse_cylinder_function(cfg.function, s.model.dim());
    const auto lo = malliavin::clark_ocone_residual_n1(s.model, s.grid, s.x0, f, s.epsilon,
                                                       cfg.seed, cfg.n_outer, cfg.n_inner,
                                                       cfg.workers);
    const auto hi = malliavin::clark_ocone_residual_n1(s.model, s.grid, s.x0, f, s.epsilon,
                                                       cfg.seed, cfg.n_outer, 4 * cfg.n_inner,
                                                       cfg.workers);
    const double ratio =
        hi.residual_sq.mean > 0.0 ? lo.residual_sq.mean / hi.residual_sq.mean : 1e300;
    CheckOutcome out;
    const bool at_noise_floor = hi.residual_sq.mean < 2.0 * s.grid.dt &&
                                lo.residual_sq.mean < 2.0 * s.grid.dt;
    out.pass = at_noise_floor || ratio >= 2.0;
    out.summary["residual_sq"] = lo.residual_sq.mean;
    out.summary["residual_sq_se"] = lo.residual_sq.stderr_mean;
    out.summary["residual_sq_4x_inner"] = hi.residual_sq.mean;
    out.summary["residual_sq_4x_inner_se"] = hi.residual_sq.stderr_mean;
    out.summary["inner_scaling_ratio"] = ratio;
    out.summary["mean_f"] = lo.mean_f;
    out.summary["n_outer"] = cfg.n_outer;
    out.summary["n_inner"] = cfg.n_inner;
    return out;
}

inline CheckOutcome dirichlet_energy(const ExperimentConfig& cfg) {
    const Setup s = make_setup(cfg);
    const auto f = malliavin::parse_cylinder_function(cfg.function, s.model.dim());
    const auto g = cfg.function2.empty()
                       ? f
                       : malliavin::parse_cylinder_function(cfg.function2, s.model.dim());
    const auto e = malliavin::dirichlet_energy(s.model, s.grid, s.x0, f, g, s.epsilon, cfg.seed,
                                               cfg.n_paths, cfg.workers);
    const auto e_swapped = malliavin::dirichlet_energy(s.model, s.grid, s.x0, g, f, s.epsilon,
                                                       cfg.seed, cfg.n_paths, cfg.workers);
    CheckOutcome out;
    const bool diagonal = cfg.function2.empty() || cfg.function2 == cfg.function;
    out.pass = e.mean == e_swapped.mean && (!diagonal || e.mean >= -4.0 * e.stderr_mean);
    out.summary["energy"] = e.mean;
    out.summary["energy_se"] = e.stderr_mean;
    out.summary["symmetry_gap"] = std::abs(e.mean - e_swapped.mean);
    return out;
}

inline CheckOutcome entropy(const ExperimentConfig& cfg) {
    const Setup s = make_setup(cfg);
    const auto g = malliavin::parse_cylinder_function(cfg.function, s.model.dim());
    const auto e = functional::entropy(s.model, s.grid, s.x0, g, cfg.seed, cfg.n_paths,
                                       cfg.workers);
    CheckOutcome out;
    out.pass = e.ent >= -4.0 * e.stderr_ent;
    out.summary["entropy"] = e.ent;
    out.summary["entropy_se"] = e.stderr_ent;
    out.summary["n_clamped"] = e.n_clamped;
    return out;
}

inline void emit_inequality(Json& j, const functional::InequalityCheck& c) {
    Json e;
    e["lhs"] = c.lhs;
    e["lhs_se"] = c.lhs_se;
    e["rhs"] = c.rhs;
    e["rhs_se"] = c.rhs_se;
    e["margin"] = c.margin;
    e["equality"] = c.equality;
    e["pass"] = c.pass;
    j[c.name] = e;
}

inline CheckOutcome lsi(const ExperimentConfig& cfg, const std::string& which) {
    const Setup s = make_setup(cfg);
    const auto g = malliavin::parse_cylinder_function(cfg.function, s.model.dim());
    const auto chain = functional::lsi_chain_estimates(s.model, s.grid, s.x0, g, s.epsilon,
                                                       cfg.seed, cfg.n_paths, cfg.workers);
    CheckOutcome out;
    out.summary["entropy"] = chain.entropy.ent;
    out.summary["entropy_se"] = chain.entropy.stderr_ent;
    out.summary["damped_energy"] = chain.damped_energy.mean;
    out.summary["partition_sum"] = chain.partition_sum.mean;
    out.summary["intrinsic_energy"] = chain.intrinsic_energy.mean;
    out.summary["growth_factor"] = chain.growth;
    out.summary["full_constant"] = chain.full_constant;
    if (which == "lsi-chain") {
        bool pass = true;
        for (const auto& c : functional::lsi_chain_checks(chain)) {
            emit_inequality(out.summary, c);
            pass = pass && c.pass;
        }
        out.pass = pass;
        return out;
    }
    functional::InequalityCheck c;
    if (which == "lsi-damped") c = functional::lsi_damped_check(chain);
    else if (which == "lsi-partition") c = functional::partition_bound_check(chain);
    else if (which == "lsi-intrinsic") c = functional::intrinsic_bound_check(chain);
    else c = functional::lsi_full_check(chain);
    emit_inequality(out.summary, c);
    out.summary["lhs"] = c.lhs;
    out.summary["lhs_se"] = c.lhs_se;
    out.summary["rhs"] = c.rhs;
    out.summary["rhs_se"] = c.rhs_se;
    out.summary["margin"] = c.margin;
    out.pass = c.pass;
    return out;
}

inline CheckOutcome cc_distance_check(const ExperimentConfig& cfg) {
    const Setup s = make_setup(cfg);
    if (s.model.heisenberg_n == 0) throw UsageError("cc-distance: Heisenberg models only");
    CheckOutcome out;
    const auto sandwich = conc::estimate_koranyi_sandwich(s.model);
    Vec plane = Vec::Zero(s.model.dim());
    plane(0) = 0.7;
    plane(1) = -0.4;
    const double r = std::sqrt(0.7 * 0.7 + 0.4 * 0.4);
    const double plane_err = std::abs(conc::cc_distance(s.model, plane) - r);
    Vec axis = Vec::Zero(s.model.dim());
    axis(s.model.dim() - 1) = 0.25;
    const double axis_err =
        std::abs(conc::cc_distance(s.model, axis) - 2.0 * std::sqrt(kPi * 0.25));
    // symmetry and triangle inequality on deterministic probe triples
    rng::Stream probe(cfg.seed, 1, rng::Purpose::Probe);
    double sym_gap = 0.0;
    double triangle_excess = -1e300;
    for (int rep = 0; rep < 64; ++rep) {
        Vec p(s.model.dim()), q(s.model.dim());
        for (int i = 0; i < s.model.dim(); ++i) {
            p(i) = 0.6 * probe.gaussian();
            q(i) = 0.6 * probe.gaussian();
        }
        sym_gap = std::max(sym_gap, std::abs(conc::cc_distance(s.model, p) -
                                             conc::cc_distance(s.model, s.model.group_inv(p))));
        const double dpq = conc::cc_distance_between(s.model, p, q);
        const double split = conc::cc_distance(s.model, p) + conc::cc_distance(s.model, q);
        triangle_excess = std::max(triangle_excess, dpq - split);
    }
    out.pass = plane_err < 1e-10 && axis_err < 1e-8 && sym_gap < 1e-10 &&
               triangle_excess < 1e-8 && sandwich.c1 > 1.0 - 1e-6 &&
               sandwich.c2 < std::sqrt(kPi) + 1e-6;
    out.summary["plane_error"] = plane_err;
    out.summary["axis_error"] = axis_err;
    out.summary["symmetry_gap"] = sym_gap;
    out.summary["triangle_excess"] = triangle_excess;
    out.summary["sandwich_c1"] = sandwich.c1;
    out.summary["sandwich_c2"] = sandwich.c2;
    return out;
}

inline CheckOutcome eps_distance_check(const ExperimentConfig& cfg) {
    validate_common(cfg);
    const auto model = geom::build_model(cfg.model);
    if (model.heisenberg_n == 0) throw UsageError("eps-distance: Heisenberg models only");
    std::vector<double> ladder = cfg.epsilon;
    if (ladder.size() < 2) ladder = {0.25, 0.5, 1.0, 2.0, 4.0};
    CheckOutcome out;
    double max_monotone_violation = -1e300;
    double max_cc_violation = -1e300;
    double plane_err = 0.0;
    std::uint64_t fallbacks = 0;
    out.csv_lines.push_back("point_index,epsilon,d_eps,d_cc,converged");
    for (int ip = 0; ip < 20; ++ip) {
        Vec p = Vec::Zero(model.dim());
        const double ang = 2.0 * kPi * ip / 20.0;
        p(0) = 0.8 * std::cos(ang);
        p(1) = 0.8 * std::sin(ang);
        p(model.dim() - 1) = -0.3 + 0.03 * ip;
        const double dcc = conc::cc_distance(model, p);
        double prev = std::numeric_limits<double>::infinity();
        for (double eps : ladder) {
            const auto de = conc::riemannian_eps_distance(model, p, eps);
            if (!de.converged) ++fallbacks;
            max_cc_violation = std::max(max_cc_violation, de.value - dcc * (1.0 + 1e-7));
            if (std::isfinite(prev)) {
                max_monotone_violation =
                    std::max(max_monotone_violation, de.value - prev * (1.0 + 1e-7));
            }
            prev = de.value;
            char line[160];
            std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%d", ip, eps, de.value, dcc,
                          de.converged ? 1 : 0);
            out.csv_lines.push_back(line);
        }
    }
    Vec plane = Vec::Zero(model.dim());
    plane(0) = 0.5;
    for (double eps : ladder) {
        plane_err = std::max(plane_err,
                             std::abs(conc::riemannian_eps_distance(model, plane, eps).value - 0.5));
    }
    out.pass = max_monotone_violation <= 0.0 && max_cc_violation <= 0.0 && plane_err < 1e-9 &&
               fallbacks == 0;
    out.summary["max_monotonicity_violation"] = max_monotone_violation;
    out.summary["max_cc_violation"] = max_cc_violation;
    out.summary["plane_error"] = plane_err;
    out.summary["fallback_records"] = fallbacks;
    return out;
}

inline CheckOutcome herbst(const ExperimentConfig& cfg) {
    const Setup s = make_setup(cfg);
    std::vector<double> r_grid = cfg.r_grid;
    if (r_grid.empty()) r_grid = {0.5, 1.0, 1.5, 2.0};
    const auto r = conc::herbst_bound_check(s.model, s.grid, s.x0, s.epsilon, r_grid, cfg.seed,
                                            cfg.n_paths, cfg.workers);
    CheckOutcome out;
    out.pass = r.pass;
    out.summary["e_sup"] = r.curve.e_sup;
    out.summary["conservative_surrogate"] = r.curve.conservative;
    out.summary["reevaluated_paths"] = r.reevaluated_paths;
    out.csv_lines.push_back("r,p_hat,wilson_lo,wilson_hi,bound_value,pass");
    Json points = Json::array();
    for (const auto& pt : r.curve.points) {
        char line[200];
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%.17g,%d", pt.r, pt.p_hat,
                      pt.wilson_lo, pt.wilson_hi, pt.bound_value, pt.pass ? 1 : 0);
        out.csv_lines.push_back(line);
        Json pj;
        pj["r"] = pt.r;
        pj["p_hat"] = pt.p_hat;
        pj["upper_one_sided"] = pt.upper_one_sided;
        pj["bound"] = pt.bound_value;
        pj["pass"] = pt.pass;
        points.push_back(pj);
    }
    out.summary["points"] = points;
    return out;
}

inline CheckOutcome tail_slope(const ExperimentConfig& cfg) {
    const Setup s = make_setup(cfg);
    std::vector<double> r_grid = cfg.r_grid;
    if (r_grid.empty()) {
        for (double r = 0.5; r <= 7.0 + 1e-12; r += 0.5) r_grid.push_back(r);
    }
    const auto r = conc::tail_slope_sandwich(s.model, s.grid, s.x0, r_grid, cfg.seed, cfg.n_paths,
                                             cfg.workers);
    CheckOutcome out;
    out.pass = r.verdict != conc::SlopeVerdict::Fail;
    out.summary["slope"] = r.slope;
    out.summary["window_lo"] = r.window.lo;
    out.summary["window_hi"] = r.window.hi;
    out.summary["slack"] = r.slack;
    out.summary["finite_r_surrogate"] = r.finite_r_surrogate;
    out.summary["verdict"] = r.verdict == conc::SlopeVerdict::Pass
                                 ? "PASS"
                                 : (r.verdict == conc::SlopeVerdict::Fail ? "FAIL" : "INCONCLUSIVE");
    Json used = Json::array();
    for (double rv : r.r_used) used.push_back(rv);
    out.summary["r_used"] = used;
    if (s.model.bounds.rho2) {
        out.summary["lower_bound_constant"] =
            conc::lower_bound_constant(s.model, s.epsilon, s.grid.T);
    }
    out.csv_lines.push_back("r,p_hat,wilson_lo,wilson_hi,bound_value,pass");
    for (const auto& pt : r.curve.points) {
        char line[200];
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%.17g,%d", pt.r, pt.p_hat,
                      pt.wilson_lo, pt.wilson_hi, pt.bound_value, pt.pass ? 1 : 0);
        out.csv_lines.push_back(line);
    }
    return out;
}

inline CheckOutcome dump(const ExperimentConfig& cfg) {
    const Setup s = make_setup(cfg);
    if (cfg.dump_paths.empty() && cfg.dump_transports.empty()) {
        throw UsageError("dump: set dump_paths and/or dump_transports");
    }
    sde::TransportOptions opt;
    opt.epsilon = s.epsilon;
    opt.substeps = cfg.substeps;

    std::ofstream paths_out, tr_out;
    if (!cfg.dump_paths.empty()) {
        paths_out.open(cfg.dump_paths, std::ios::binary);
        if (!paths_out) throw UsageError("cannot open " + cfg.dump_paths);
        sde::DumpHeader h;
        h.kind = 1;
        h.model_name = s.model.name;
        h.seed = cfg.seed;
        h.epsilon = s.epsilon;
        h.dt = s.grid.dt;
        h.T = s.grid.T;
        h.n_paths = cfg.n_paths;
        h.n_steps = static_cast<std::uint64_t>(s.grid.n_steps);
        h.dim = static_cast<std::uint32_t>(s.model.dim());
        h.dim_h = static_cast<std::uint32_t>(s.model.dim_h);
        sde::write_dump_header(paths_out, h);
    }
    if (!cfg.dump_transports.empty()) {
        tr_out.open(cfg.dump_transports, std::ios::binary);
        if (!tr_out) throw UsageError("cannot open " + cfg.dump_transports);
        sde::DumpHeader h;
        h.kind = 2;
        h.model_name = s.model.name;
        h.seed = cfg.seed;
        h.epsilon = s.epsilon;
        h.dt = s.grid.dt;
        h.T = s.grid.T;
        h.n_paths = cfg.n_paths;
        h.n_steps = static_cast<std::uint64_t>(s.grid.n_steps);
        h.dim = static_cast<std::uint32_t>(s.model.dim());
        h.dim_h = static_cast<std::uint32_t>(s.model.dim_h);
        sde::write_dump_header(tr_out, h);
    }

    // single writer: serial loop regardless of cfg.workers
    sde::HorizontalPath path;
    sde::TransportState tr;
    for (std::uint64_t i = 0; i < cfg.n_paths; ++i) {
        rng::Stream stream(cfg.seed, i, rng::Purpose::Path);
        const auto inc = sde::sample_brownian(s.model.dim_h, s.grid, stream);
        sde::integrate_horizontal_bm(s.model, s.grid, inc, s.x0, path);
        if (paths_out.is_open()) sde::append_path_payload(paths_out, path);
        if (tr_out.is_open()) {
            sde::integrate_transport(s.model, path, opt, tr);
            sde::append_transport_payload(tr_out, tr);
        }
    }
    CheckOutcome out;
    out.pass = true;
    out.summary["paths_file"] = cfg.dump_paths;
    out.summary["transports_file"] = cfg.dump_transports;
    out.summary["n_paths"] = cfg.n_paths;
    return out;
}

} // namespace checks

inline const std::vector<std::string>& check_names() {
    static const std::vector<std::string> names{
        "geometry",       "brownian-moments", "transport-bound", "isometry",
        "tau-consistency", "ibp",             "grad-expectation", "clark-ocone",
        "dirichlet-energy", "entropy",        "lsi-damped",      "lsi-partition",
        "lsi-intrinsic",  "lsi-full",         "lsi-chain",       "cc-distance",
        "eps-distance",   "herbst",           "tail-slope",      "dump"};
    return names;
}

inline const std::vector<std::string>& model_names() {
    static const std::vector<std::string> names{"heisenberg-1", "heisenberg-2", "heisenberg-3",
                                                "euclidean-1", "euclidean-2", "euclidean-3"};
    return names;
}

inline CheckOutcome dispatch_check(const ExperimentConfig& cfg) {
    const std::string& c = cfg.check;
    if (c == "geometry") return checks::geometry(cfg);
    if (c == "brownian-moments") return checks::brownian_moments(cfg);
    if (c == "transport-bound") return checks::transport_bound(cfg);
    if (c == "isometry") return checks::isometry(cfg);
    if (c == "tau-consistency") return checks::tau_consistency(cfg);
    if (c == "ibp") return checks::ibp(cfg);
    if (c == "grad-expectation") return checks::grad_expectation(cfg);
    if (c == "clark-ocone") return checks::clark_ocone(cfg);
    if (c == "dirichlet-energy") return checks::dirichlet_energy(cfg);
    if (c == "entropy") return checks::entropy(cfg);
    if (c == "lsi-damped" || c == "lsi-partition" || c == "lsi-intrinsic" || c == "lsi-full" ||
        c == "lsi-chain") {
        return checks::lsi(cfg, c);
    }
    if (c == "cc-distance") return checks::cc_distance_check(cfg);
    if (c == "eps-distance") return checks::eps_distance_check(cfg);
    if (c == "herbst") return checks::herbst(cfg);
    if (c == "tail-slope") return checks::tail_slope(cfg);
    if (c == "dump") return checks::dump(cfg);
    throw UsageError("unknown check: " + c + " (see list-checks)");
}

// --- top level entry points ---

inline Json config_echo(const ExperimentConfig& c) {
    Json j;
    j["check"] = c.check;
    j["model"] = c.model;
    if (c.epsilon.size() == 1) j["epsilon"] = c.epsilon[0];
    else {
        Json eps = Json::array();
        for (double e : c.epsilon) eps.push_back(e);
        j["epsilon"] = eps;
    }
    j["T"] = c.T;
    j["dt"] = c.dt;
    j["n_paths"] = c.n_paths;
    j["seed"] = c.seed;
    j["function"] = c.function;
    if (!c.function2.empty()) j["function2"] = c.function2;
    j["gamma"] = c.gamma;
    Json times = Json::array();
    for (double t : c.times) times.push_back(t);
    j["times"] = times;
    j["workers"] = c.workers;
    j["substeps"] = c.substeps;
    return j;
}

struct RunArtifacts {
    int exit_code = 0;
    Json summary;
};

inline void write_outputs(const ExperimentConfig& cfg, const Json& summary,
                          const std::vector<std::string>& csv_lines) {
    if (cfg.output.empty()) return;
    {
        std::ofstream js(cfg.output + ".json");
        if (!js) throw UsageError("cannot write " + cfg.output + ".json");
        js << summary.dump(2) << "\n";
    }
    if (!csv_lines.empty()) {
        std::ofstream cs(cfg.output + ".csv");
        if (!cs) throw UsageError("cannot write " + cfg.output + ".csv");
        for (const auto& line : csv_lines) cs << line << "\n";
    }
}

inline RunArtifacts run(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckOutcome outcome = dispatch_check(cfg);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    RunArtifacts art;
    art.summary["config"] = config_echo(cfg);
    art.summary["results"] = outcome.summary;
    art.summary["pass"] = outcome.pass;
    art.summary["wall_time_s"] = wall;
    write_outputs(cfg, art.summary, outcome.csv_lines);
    art.exit_code = outcome.pass ? 0 : 1;
    return art;
}

// Per-epsilon records plus monotonicity summaries of the exposed constants.
inline RunArtifacts sweep(const ExperimentConfig& cfg) {
    validate_common(cfg);
    if (cfg.epsilon.size() < 2) throw UsageError("sweep: need at least two epsilon values");
    const auto t0 = std::chrono::steady_clock::now();
    RunArtifacts art;
    Json records = Json::array();
    std::vector<double> bound_constants, full_constants;
    std::vector<std::string> csv{"epsilon,pass,bound_constant,full_constant"};
    bool all_pass = true;
    for (double eps : cfg.epsilon) {
        ExperimentConfig one = cfg;
        one.epsilon = {eps};
        one.output.clear();
        CheckOutcome outcome = dispatch_check(one);
        all_pass = all_pass && outcome.pass;
        Json rec;
        rec["epsilon"] = eps;
        rec["pass"] = outcome.pass;
        rec["results"] = outcome.summary;
        records.push_back(rec);
        double bc = std::numeric_limits<double>::quiet_NaN();
        double fc = std::numeric_limits<double>::quiet_NaN();
        if (outcome.summary.contains("bound_constant")) {
            bc = outcome.summary["bound_constant"].get<double>();
            bound_constants.push_back(bc);
        }
        if (outcome.summary.contains("full_constant")) {
            fc = outcome.summary["full_constant"].get<double>();
            full_constants.push_back(fc);
        }
        char line[120];
        std::snprintf(line, sizeof(line), "%.17g,%d,%.17g,%.17g", eps, outcome.pass ? 1 : 0, bc,
                      fc);
        csv.push_back(line);
    }
    auto decreasing = [](const std::vector<double>& v) {
        for (std::size_t i = 1; i < v.size(); ++i) {
            if (v[i] >= v[i - 1]) return false;
        }
        return v.size() >= 2;
    };
    Json mono;
    if (!bound_constants.empty()) mono["bound_constant_decreasing"] = decreasing(bound_constants);
    if (!full_constants.empty()) mono["full_constant_decreasing"] = decreasing(full_constants);
    art.summary["config"] = config_echo(cfg);
    art.summary["records"] = records;
    art.summary["monotonicity"] = mono;
    art.summary["pass"] = all_pass;
    art.summary["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_outputs(cfg, art.summary, csv);
    art.exit_code = all_pass ? 0 : 1;
    return art;
}

// Convergence study: isometry residual and weak error against dt over a
// common-seed ladder. The weak error is measured by pairwise differences of
// E[phi(X_T)] between adjacent levels with shared increments (phi = square
// of the last coordinate).
inline RunArtifacts convergence_study(const ExperimentConfig& cfg) {
    validate_common(cfg);
    if (cfg.dt_ladder.size() < 3) throw UsageError("converge: need at least three dt values");
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = geom::build_model(cfg.model);
    std::vector<double> ladder = cfg.dt_ladder;
    std::sort(ladder.begin(), ladder.end(), std::greater<double>());
    std::vector<int> steps;
    for (double dtv : ladder) {
        const double raw = cfg.T / dtv;
        const int n = static_cast<int>(std::llround(raw));
        if (n < 1 || std::abs(raw - n) > 1e-9) {
            throw UsageError("each ladder dt must divide T");
        }
        steps.push_back(n);
    }
    const int n_fine = steps.back();
    for (int n : steps) {
        if (n_fine % n != 0) throw UsageError("ladder grids must nest (finest divisible by all)");
    }
    const Vec x0 = Vec::Zero(model.dim());

    // isometry residual per level (transport batch, reduced path count)
    const std::uint64_t n_iso = std::min<std::uint64_t>(cfg.n_paths, 2000);
    std::vector<double> iso(ladder.size(), 0.0);
    for (std::size_t lev = 0; lev < ladder.size(); ++lev) {
        ExperimentConfig one = cfg;
        one.dt = ladder[lev];
        one.epsilon = cfg.epsilon.size() == 1 ? cfg.epsilon : std::vector<double>{1.0};
        one.n_paths = n_iso;
        Setup s = make_setup(one);
        const auto acc = checks::transport_batch(s, one, -1.0);
        iso[lev] = acc.max_isometry;
    }

    // weak error by common-increment coarsening from the finest grid
    struct Acc {
        std::vector<stats::MeanVar> phi;
        void ensure(std::size_t n) {
            if (phi.empty()) phi.resize(n);
        }
        void merge(const Acc& o) {
            if (o.phi.empty()) return;
            ensure(o.phi.size());
            for (std::size_t i = 0; i < phi.size(); ++i) phi[i].merge(o.phi[i]);
        }
    };
    const sde::TimeGrid fine = sde::TimeGrid::make(cfg.T, n_fine);
    auto acc = parallel::run<Acc>(cfg.n_paths, cfg.workers, [&](std::uint64_t i, Acc& a) {
        a.ensure(ladder.size());
        rng::Stream stream(cfg.seed, i, rng::Purpose::Path);
        const auto inc_fine = sde::sample_brownian(model.dim_h, fine, stream);
        for (std::size_t lev = 0; lev < ladder.size(); ++lev) {
            const int n = steps[lev];
            const int factor = n_fine / n;
            sde::Increments inc(n, model.dim_h);
            for (int k = 0; k < n; ++k) {
                for (int c = 0; c < model.dim_h; ++c) {
                    double sum = 0.0;
                    for (int q = 0; q < factor; ++q) sum += inc_fine(k * factor + q, c);
                    inc(k, c) = sum;
                }
            }
            const sde::TimeGrid grid = sde::TimeGrid::make(cfg.T, n);
            const auto path = sde::integrate_horizontal_bm(model, grid, inc, x0);
            const double last = path.states(n, model.dim() - 1);
            a.phi[lev].add(last * last);
        }
    });

    std::vector<double> log_dt, log_iso, log_weak, weak_diffs;
    for (std::size_t lev = 0; lev + 1 < ladder.size(); ++lev) {
        weak_diffs.push_back(std::abs(acc.phi[lev].mean() - acc.phi[lev + 1].mean()));
    }
    bool iso_exact = true;
    for (double v : iso) iso_exact = iso_exact && v < 1e-13;
    bool weak_exact = true;
    for (double v : weak_diffs) weak_exact = weak_exact && v < 1e-13;
    double iso_slope = 0.0, weak_slope = 0.0;
    if (!iso_exact) {
        for (std::size_t lev = 0; lev < ladder.size(); ++lev) {
            log_dt.push_back(std::log(ladder[lev]));
            log_iso.push_back(std::log(iso[lev]));
        }
        iso_slope = stats::regression_slope(log_dt, log_iso);
    }
    if (!weak_exact) {
        std::vector<double> ld;
        for (std::size_t lev = 0; lev + 1 < ladder.size(); ++lev) {
            ld.push_back(std::log(ladder[lev]));
            log_weak.push_back(std::log(weak_diffs[lev]));
        }
        weak_slope = stats::regression_slope(ld, log_weak);
    }

    RunArtifacts art;
    const bool pass = (iso_exact || (iso_slope > 0.8 && iso_slope < 1.2)) &&
                      (weak_exact || (weak_slope > 0.6 && weak_slope < 1.4));
    art.summary["config"] = config_echo(cfg);
    Json jd = Json::array(), ji = Json::array(), jw = Json::array();
    for (double v : ladder) jd.push_back(v);
    for (double v : iso) ji.push_back(v);
    for (double v : weak_diffs) jw.push_back(v);
    art.summary["dt_ladder"] = jd;
    art.summary["isometry_residuals"] = ji;
    art.summary["weak_error_diffs"] = jw;
    art.summary["isometry_slope"] = iso_slope;
    art.summary["isometry_exact_zero"] = iso_exact;
    art.summary["weak_slope"] = weak_slope;
    art.summary["weak_exact_zero"] = weak_exact;
    art.summary["pass"] = pass;
    art.summary["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::vector<std::string> csv{"dt,isometry_residual"};
    for (std::size_t lev = 0; lev < ladder.size(); ++lev) {
        char line[80];
        std::snprintf(line, sizeof(line), "%.17g,%.17g", ladder[lev], iso[lev]);
        csv.push_back(line);
    }
    write_outputs(cfg, art.summary, csv);
    art.exit_code = pass ? 0 : 1;
    return art;
}

// Frame constants of a model as a JSON document (debug/documentation aid).
inline Json export_frames(const std::string& model_name) {
    const auto m = geom::build_model(model_name);
    Json j;
    j["name"] = m.name;
    j["dim_h"] = m.dim_h;
    j["dim_v"] = m.dim_v;
    j["K"] = m.bounds.K;
    j["kappa"] = m.bounds.kappa;
    if (m.bounds.rho2) j["rho2"] = *m.bounds.rho2;
    Vec origin = Vec::Zero(m.dim());
    const Mat f = m.frame_coefficients(origin);
    Json frame = Json::array();
    for (int c = 0; c < m.dim(); ++c) {
        Json col = Json::array();
        for (int r = 0; r < m.dim(); ++r) col.push_back(f(r, c));
        frame.push_back(col);
    }
    j["frame_at_origin"] = frame;
    Json torsion = Json::array();
    for (const auto& t : m.torsion) {
        Json rows = Json::array();
        for (int r = 0; r < m.dim_h; ++r) {
            Json row = Json::array();
            for (int c = 0; c < m.dim_h; ++c) row.push_back(t(r, c));
            rows.push_back(row);
        }
        torsion.push_back(rows);
    }
    j["torsion"] = torsion;
    return j;
}

} // namespace hpath::harness
