#pragma once

#include <vector>

#include "switchctl/matrix.hpp"

namespace switchctl {

// Uniform grid on [0, T] with composite Simpson weights. The node count is
// forced even so the Simpson panels tile the horizon.
struct TimeGrid {
    double horizon = 0.0;
    Index steps = 0;  // number of subintervals N (even)

    TimeGrid() = default;
    TimeGrid(double t_horizon, Index n) {
        require(t_horizon > 0.0, "TimeGrid: horizon must be positive");
        require(n >= 2, "TimeGrid: need at least two subintervals");
        if (n % 2 != 0) ++n;  // odd N rounded up
        horizon = t_horizon;
        steps = n;
    }

    Index nodes() const { return steps + 1; }
    double dt() const { return horizon / static_cast<double>(steps); }
    double node(Index k) const { return static_cast<double>(k) * horizon / static_cast<double>(steps); }

    double weight(Index k) const {
        const double h = dt();
        if (k == 0 || k == steps) return h / 3.0;
        return (k % 2 == 1) ? 4.0 * h / 3.0 : 2.0 * h / 3.0;
    }

    std::vector<double> weights() const {
        std::vector<double> w(static_cast<size_t>(nodes()));
        for (Index k = 0; k <= steps; ++k) w[static_cast<size_t>(k)] = weight(k);
        return w;
    }
};

}  // namespace switchctl
