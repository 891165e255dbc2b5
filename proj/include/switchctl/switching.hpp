#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "switchctl/adjoint.hpp"
#include "switchctl/frequencies.hpp"

namespace switchctl {

// Per-node active channel from the weighted observation energies, plus the
// near-tie bookkeeping that stands in for the zero-measure tie set. A node
// counts as a tie when the top two energies agree to tie_tol relative to the
// node's own top value; decaying flows make any global reference flag whole
// stretches where every channel is merely small.
struct ActivePartition {
    std::vector<Index> active;  // argmax channel per node, ties to smallest index
    std::vector<bool> tie_mask;
    double scale = 0.0;  // max over nodes of the top weighted energy
    double tie_fraction = 0.0;
    bool degenerate = false;  // identically zero trace: every node is a tie

    Index nodes() const { return static_cast<Index>(active.size()); }
};

inline ActivePartition classify(const AdjointTrace& trace, const WeightFamily& weights,
                                const TimeGrid& grid, double tie_tol) {
    const Index n = static_cast<Index>(trace.traces.size());
    const Index n_nodes = trace.nodes();
    require(weights.size() == n, "classify: one weight per channel required");
    require(n_nodes == grid.nodes(), "classify: trace and grid node counts differ");

    ActivePartition part;
    part.active.resize(static_cast<size_t>(n_nodes));
    part.tie_mask.assign(static_cast<size_t>(n_nodes), false);

    std::vector<double> top(static_cast<size_t>(n_nodes));
    std::vector<double> gap(static_cast<size_t>(n_nodes));
    for (Index k = 0; k < n_nodes; ++k) {
        const double t = grid.node(k);
        Index best_i = 0;
        double best = -1.0, second = -1.0;
        for (Index i = 0; i < n; ++i) {
            const double q = weights.alpha(i, t) * trace.traces[static_cast<size_t>(i)][static_cast<size_t>(k)].squaredNorm();
            if (q > best) {
                second = best;
                best = q;
                best_i = i;
            } else if (q > second) {
                second = q;
            }
        }
        part.active[static_cast<size_t>(k)] = best_i;
        top[static_cast<size_t>(k)] = best;
        gap[static_cast<size_t>(k)] = (n >= 2) ? best - second : std::numeric_limits<double>::infinity();
        part.scale = std::max(part.scale, best);
    }

    if (part.scale == 0.0) {
        part.degenerate = true;
        part.tie_mask.assign(static_cast<size_t>(n_nodes), true);
        part.tie_fraction = 1.0;
        return part;
    }
    Index ties = 0;
    for (Index k = 0; k < n_nodes; ++k) {
        if (gap[static_cast<size_t>(k)] <= tie_tol * top[static_cast<size_t>(k)]) {
            part.tie_mask[static_cast<size_t>(k)] = true;
            ++ties;
        }
    }
    part.tie_fraction = static_cast<double>(ties) / static_cast<double>(n_nodes);
    return part;
}

// Node samples of the switching controls u_i = alpha_i B_i^T Z on the active
// set and exactly zero elsewhere.
struct SwitchingControlSet {
    std::vector<std::vector<Vector>> controls;  // controls[i][k], zero-filled off the active set
    std::vector<Index> active;                  // active channel per node
    Index switch_count = 0;
    double tie_fraction = 0.0;
    std::vector<double> omegas;
    bool degenerate = false;

    Index channels() const { return static_cast<Index>(controls.size()); }
    Index nodes() const { return controls.empty() ? 0 : static_cast<Index>(controls[0].size()); }
};

inline SwitchingControlSet extract_controls(const ActivePartition& part, const AdjointTrace& trace,
                                            const WeightFamily& weights, const TimeGrid& grid) {
    const Index n = static_cast<Index>(trace.traces.size());
    const Index n_nodes = trace.nodes();
    require(part.nodes() == n_nodes, "extract_controls: partition and trace node counts differ");
    require(n_nodes == grid.nodes(), "extract_controls: trace and grid node counts differ");

    SwitchingControlSet cs;
    cs.omegas = weights.omegas;
    cs.active = part.active;
    cs.tie_fraction = part.tie_fraction;
    cs.degenerate = part.degenerate;
    cs.controls.resize(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) {
        auto& ui = cs.controls[static_cast<size_t>(i)];
        ui.resize(static_cast<size_t>(n_nodes));
        for (Index k = 0; k < n_nodes; ++k)
            ui[static_cast<size_t>(k)] = Vector::Zero(trace.traces[static_cast<size_t>(i)][static_cast<size_t>(k)].size());
    }
    if (!part.degenerate) {
        for (Index k = 0; k < n_nodes; ++k) {
            const Index i = part.active[static_cast<size_t>(k)];
            const double a = weights.alpha(i, grid.node(k));
            cs.controls[static_cast<size_t>(i)][static_cast<size_t>(k)] =
                a * trace.traces[static_cast<size_t>(i)][static_cast<size_t>(k)];
        }
    }
    for (Index k = 0; k + 1 < n_nodes; ++k)
        if (cs.active[static_cast<size_t>(k)] != cs.active[static_cast<size_t>(k + 1)]) ++cs.switch_count;
    return cs;
}

// Switching condition: at every node the product over channels of the summed
// norms of the other channels vanishes, i.e. at most one block is nonzero.
inline bool validate_switching(const SwitchingControlSet& cs) {
    const Index n = cs.channels();
    const Index n_nodes = cs.nodes();
    for (Index k = 0; k < n_nodes; ++k) {
        double prod = 1.0;
        for (Index i = 0; i < n; ++i) {
            double others = 0.0;
            for (Index j = 0; j < n; ++j) {
                if (j == i) continue;
                others += cs.controls[static_cast<size_t>(j)][static_cast<size_t>(k)].norm();
            }
            prod *= others;
        }
        if (prod != 0.0) return false;
    }
    return true;
}

// Optional post-pass: bisect the weighted-energy crossing inside each step
// where the active index changes. Returns one refined time per switch step.
// The integrand is analytic, so plain bisection on the sign of q_i - q_j is
// well posed. Off by default in the pipeline.
inline std::vector<double> refine_switch_times(const LtiSystem& sys, const TimeGrid& grid,
                                               const AdjointTrace& trace, const WeightFamily& weights,
                                               const ActivePartition& part, int bisections = 60) {
    std::vector<double> crossings;
    for (Index k = 0; k + 1 < grid.nodes(); ++k) {
        const Index i = part.active[static_cast<size_t>(k)];
        const Index j = part.active[static_cast<size_t>(k + 1)];
        if (i == j) continue;
        const Matrix bi_t = sys.blocks[static_cast<size_t>(i)].transpose();
        const Matrix bj_t = sys.blocks[static_cast<size_t>(j)].transpose();
        const Vector z_right = trace.z[static_cast<size_t>(k + 1)];
        const double t_right = grid.node(k + 1);
        auto diff = [&](double t) {
            const Vector z = expm((t - t_right) * sys.a.transpose()) * z_right;
            const double qi = weights.alpha(i, t) * (bi_t * z).squaredNorm();
            const double qj = weights.alpha(j, t) * (bj_t * z).squaredNorm();
            return qi - qj;
        };
        double lo = grid.node(k), hi = t_right;
        double flo = diff(lo);
        if (flo <= 0.0) {
            crossings.push_back(lo);
            continue;
        }
        for (int it = 0; it < bisections; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (diff(mid) > 0.0)
                lo = mid;
            else
                hi = mid;
        }
        crossings.push_back(0.5 * (lo + hi));
    }
    return crossings;
}

}  // namespace switchctl
