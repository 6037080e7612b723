#pragma once

#include "hpath/common.hpp"
#include "hpath/geometry.hpp"
#include "hpath/sde.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

// Cylinder functions: smooth functions of finitely many path marginals with
// exact coordinate partials, addressable by registry key.
//
// Registry grammar ("family:args", args comma-separated):
//   const:c          n=1   f = c
//   coord:i          n=1   f = p_i
//   prod:i,j         n=2   f(p, q) = p_i q_j
//   poly:i,j         n=2   f(p, q) = p_i q_j + p_i^2 / 2
//   exp:i,b          n=1   f = exp(b p_i)
//   affine:a,i       n=1   f = 1 + a p_i
//   affine2:a,i,b,j  n=2   f(p, q) = 1 + a p_i + b q_j
//   bump:c,w         n=1   f = 1 + 0.1 exp(-(p_last - c)^2 / w^2)
// Partials are analytic; a finite-difference self test pins them.

namespace hpath::malliavin {

struct CylinderFunction {
    std::string key;
    int n_times = 1;
    std::function<double(const std::vector<Vec>&)> value;
    // coordinate partial gradient with respect to slot i
    std::function<Vec(int, const std::vector<Vec>&)> partial;
};

namespace detail {

inline std::vector<double> parse_args(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) throw UsageError("empty argument in function key");
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &pos);
        } catch (const std::exception&) {
            throw UsageError("bad numeric argument: " + item);
        }
        if (pos != item.size()) throw UsageError("bad numeric argument: " + item);
        out.push_back(v);
    }
    return out;
}

inline int coord_index(double v, int dim) {
    const int i = static_cast<int>(v);
    if (i < 0 || i >= dim || static_cast<double>(i) != v) {
        throw UsageError("coordinate index out of range for model dimension " +
                         std::to_string(dim));
    }
    return i;
}

} // namespace detail

inline CylinderFunction parse_cylinder_function(const std::string& key, int dim) {
    const auto colon = key.find(':');
    const std::string family = key.substr(0, colon);
    const std::vector<double> args =
        colon == std::string::npos ? std::vector<double>{} : detail::parse_args(key.substr(colon + 1));
    auto need = [&](std::size_t n) {
        if (args.size() != n) {
            throw UsageError("function " + family + " expects " + std::to_string(n) + " arguments");
        }
    };

    CylinderFunction f;
    f.key = key;
    if (family == "const") {
        need(1);
        const double c = args[0];
        f.n_times = 1;
        f.value = [c](const std::vector<Vec>&) { return c; };
        f.partial = [dim](int, const std::vector<Vec>&) { return Vec(Vec::Zero(dim)); };
    } else if (family == "coord") {
        need(1);
        const int i = detail::coord_index(args[0], dim);
        f.n_times = 1;
        f.value = [i](const std::vector<Vec>& p) { return p[0](i); };
        f.partial = [i, dim](int, const std::vector<Vec>&) {
            Vec g = Vec::Zero(dim);
            g(i) = 1.0;
            return g;
        };
    } else if (family == "prod") {
        need(2);
        const int i = detail::coord_index(args[0], dim);
        const int j = detail::coord_index(args[1], dim);
        f.n_times = 2;
        f.value = [i, j](const std::vector<Vec>& p) { return p[0](i) * p[1](j); };
        f.partial = [i, j, dim](int slot, const std::vector<Vec>& p) {
            Vec g = Vec::Zero(dim);
            if (slot == 0) g(i) = p[1](j);
            else g(j) = p[0](i);
            return g;
        };
    } else if (family == "poly") {
        need(2);
        const int i = detail::coord_index(args[0], dim);
        const int j = detail::coord_index(args[1], dim);
        f.n_times = 2;
        f.value = [i, j](const std::vector<Vec>& p) {
            return p[0](i) * p[1](j) + 0.5 * p[0](i) * p[0](i);
        };
        f.partial = [i, j, dim](int slot, const std::vector<Vec>& p) {
            Vec g = Vec::Zero(dim);
            if (slot == 0) g(i) = p[1](j) + p[0](i);
            else g(j) = p[0](i);
            return g;
        };
    } else if (family == "exp") {
        need(2);
        const int i = detail::coord_index(args[0], dim);
        const double b = args[1];
        f.n_times = 1;
        f.value = [i, b](const std::vector<Vec>& p) { return std::exp(b * p[0](i)); };
        f.partial = [i, b, dim](int, const std::vector<Vec>& p) {
            Vec g = Vec::Zero(dim);
            g(i) = b * std::exp(b * p[0](i));
            return g;
        };
    } else if (family == "affine") {
        need(2);
        const double a = args[0];
        const int i = detail::coord_index(args[1], dim);
        f.n_times = 1;
        f.value = [a, i](const std::vector<Vec>& p) { return 1.0 + a * p[0](i); };
        f.partial = [a, i, dim](int, const std::vector<Vec>&) {
            Vec g = Vec::Zero(dim);
            g(i) = a;
            return g;
        };
    } else if (family == "affine2") {
        need(4);
        const double a = args[0];
        const int i = detail::coord_index(args[1], dim);
        const double b = args[2];
        const int j = detail::coord_index(args[3], dim);
        f.n_times = 2;
        f.value = [a, i, b, j](const std::vector<Vec>& p) {
            return 1.0 + a * p[0](i) + b * p[1](j);
        };
        f.partial = [a, i, b, j, dim](int slot, const std::vector<Vec>&) {
            Vec g = Vec::Zero(dim);
            if (slot == 0) g(i) = a;
            else g(j) = b;
            return g;
        };
    } else if (family == "bump") {
        need(2);
        const double c = args[0];
        const double w = args[1];
        if (w <= 0.0) throw UsageError("bump: width must be positive");
        const int i = dim - 1; // last coordinate (vertical on Heisenberg)
        f.n_times = 1;
        f.value = [c, w, i](const std::vector<Vec>& p) {
            const double u = (p[0](i) - c) / w;
            return 1.0 + 0.1 * std::exp(-u * u);
        };
        f.partial = [c, w, i, dim](int, const std::vector<Vec>& p) {
            Vec g = Vec::Zero(dim);
            const double u = (p[0](i) - c) / w;
            g(i) = 0.1 * std::exp(-u * u) * (-2.0 * u / w);
            return g;
        };
    } else {
        throw UsageError("unknown function family: " + family);
    }
    return f;
}

// Finite-difference self test of the analytic partials; returns the largest
// absolute deviation over the supplied evaluation points.
inline double partials_self_test(const CylinderFunction& f, const std::vector<std::vector<Vec>>& args,
                                 double h = 1e-5) {
    double worst = 0.0;
    for (const auto& pts : args) {
        for (int slot = 0; slot < f.n_times; ++slot) {
            const Vec grad = f.partial(slot, pts);
            for (int c = 0; c < grad.size(); ++c) {
                auto shifted = pts;
                shifted[static_cast<std::size_t>(slot)](c) += h;
                const double fp = f.value(shifted);
                shifted[static_cast<std::size_t>(slot)](c) -= 2.0 * h;
                const double fm = f.value(shifted);
                worst = std::max(worst, std::abs((fp - fm) / (2.0 * h) - grad(c)));
            }
        }
    }
    return worst;
}

// Marginals of a path at its partition times.
inline std::vector<Vec> marginals(const CylinderFunction& f, const sde::HorizontalPath& path) {
    const auto& idx = path.grid.partition_indices;
    if (static_cast<int>(idx.size()) != f.n_times) {
        throw UsageError("cylinder function expects " + std::to_string(f.n_times) +
                         " partition times, grid has " + std::to_string(idx.size()));
    }
    std::vector<Vec> pts;
    pts.reserve(idx.size());
    for (int k : idx) pts.push_back(path.state(k));
    return pts;
}

inline double eval_cylinder(const CylinderFunction& f, const sde::HorizontalPath& path) {
    return f.value(marginals(f, path));
}

// Coframe components of d_i f at the path marginals.
inline std::vector<Vec> coframe_differentials(const geom::ModelFoliation& model,
                                              const CylinderFunction& f,
                                              const sde::HorizontalPath& path) {
    const auto pts = marginals(f, path);
    std::vector<Vec> difs;
    difs.reserve(pts.size());
    for (int i = 0; i < f.n_times; ++i) {
        difs.push_back(model.coframe_components(pts[static_cast<std::size_t>(i)], f.partial(i, pts)));
    }
    return difs;
}

} // namespace hpath::malliavin
