#pragma once

#include "hpath/common.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace hpath::sde {

// Uniform grid on [0, T] with an optional partition subset used by cylinder
// functions. Partition times must sit exactly on grid points.
struct TimeGrid {
    double T = 0.0;
    int n_steps = 0;
    double dt = 0.0;
    std::vector<int> partition_indices; // strictly increasing, in (0, n_steps]

    static TimeGrid make(double horizon, int steps) {
        if (horizon <= 0.0) throw UsageError("TimeGrid: T must be positive");
        if (steps < 1) throw UsageError("TimeGrid: n_steps must be >= 1");
        TimeGrid g;
        g.T = horizon;
        g.n_steps = steps;
        g.dt = horizon / static_cast<double>(steps);
        return g;
    }

    double time_of(int k) const { return static_cast<double>(k) * dt; }

    int index_of(double t) const {
        const double raw = t / dt;
        const int k = static_cast<int>(std::llround(raw));
        if (k < 0 || k > n_steps || std::abs(raw - static_cast<double>(k)) > 1e-9) {
            throw UsageError("time " + std::to_string(t) + " is not a grid point");
        }
        return k;
    }

    void set_partition(const std::vector<double>& times) {
        partition_indices.clear();
        int prev = 0;
        for (double t : times) {
            const int k = index_of(t);
            if (k <= prev) throw UsageError("partition times must be strictly increasing and > 0");
            partition_indices.push_back(k);
            prev = k;
        }
    }
};

} // namespace hpath::sde
