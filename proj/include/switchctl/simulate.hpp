#pragma once

#include <cmath>
#include <vector>

#include "switchctl/rng.hpp"
#include "switchctl/switching.hpp"

namespace switchctl {

struct Trajectory {
    std::vector<Vector> y;  // node samples, y[0] = y0 exactly
    double terminal_norm = 0.0;
    double control_cost = 0.0;

    Index nodes() const { return static_cast<Index>(y.size()); }
};

// Control data at half-grid resolution: values at the nodes and at the step
// midpoints, with one active channel per sample. Midpoints inside panels
// where the active channel changes are never consumed by the integrator but
// are kept so emitted files round-trip exactly.
struct HalfGridControls {
    std::vector<std::vector<Vector>> u;  // u[i][j], j = 0..2N over t_j = j h/2
    std::vector<Index> active;           // size 2N+1

    Index channels() const { return static_cast<Index>(u.size()); }
    Index samples() const { return u.empty() ? 0 : static_cast<Index>(u[0].size()); }
};

// Midpoint samples from the analytic formula u_i(t) = alpha_i(t) B_i^T z(t),
// with z at the half-node obtained by a half-step of the adjoint propagator
// (never by interpolation). The midpoint channel is restricted to the two
// node-assigned channels of the surrounding step.
inline HalfGridControls sample_controls_halfgrid(const LtiSystem& sys, const TimeGrid& grid,
                                                 const SwitchingControlSet& cs,
                                                 const AdjointTrace& trace,
                                                 const WeightFamily& weights) {
    require(cs.nodes() == grid.nodes(), "sample_controls_halfgrid: control/grid mismatch");
    require(trace.nodes() == grid.nodes(), "sample_controls_halfgrid: trace/grid mismatch");
    const Index n = cs.channels();
    const double h = grid.dt();
    const Matrix half_step_adj = expm(-(h / 2.0) * sys.a.transpose());

    HalfGridControls hg;
    hg.u.resize(static_cast<size_t>(n));
    hg.active.resize(static_cast<size_t>(2 * grid.steps + 1));
    for (Index i = 0; i < n; ++i)
        hg.u[static_cast<size_t>(i)].resize(static_cast<size_t>(2 * grid.steps + 1));

    for (Index k = 0; k <= grid.steps; ++k) {
        hg.active[static_cast<size_t>(2 * k)] = cs.active[static_cast<size_t>(k)];
        for (Index i = 0; i < n; ++i)
            hg.u[static_cast<size_t>(i)][static_cast<size_t>(2 * k)] = cs.controls[static_cast<size_t>(i)][static_cast<size_t>(k)];
    }
    for (Index k = 0; k < grid.steps; ++k) {
        const double t_mid = grid.node(k) + 0.5 * h;
        const Vector z_mid = half_step_adj * trace.z[static_cast<size_t>(k + 1)];
        const Index il = cs.active[static_cast<size_t>(k)];
        const Index ir = cs.active[static_cast<size_t>(k + 1)];
        Index pick = il;
        if (il != ir && !cs.degenerate) {
            const double ql = weights.alpha(il, t_mid) *
                              (sys.blocks[static_cast<size_t>(il)].transpose() * z_mid).squaredNorm();
            const double qr = weights.alpha(ir, t_mid) *
                              (sys.blocks[static_cast<size_t>(ir)].transpose() * z_mid).squaredNorm();
            pick = (qr > ql) ? ir : ((ql > qr) ? il : std::min(il, ir));
        }
        const size_t j = static_cast<size_t>(2 * k + 1);
        hg.active[j] = pick;
        for (Index i = 0; i < n; ++i) {
            const Index mi = sys.blocks[static_cast<size_t>(i)].cols();
            hg.u[static_cast<size_t>(i)][j] = Vector::Zero(mi);
        }
        if (!cs.degenerate) {
            hg.u[static_cast<size_t>(pick)][j] =
                weights.alpha(pick, t_mid) * (sys.blocks[static_cast<size_t>(pick)].transpose() * z_mid);
        }
    }
    return hg;
}

// Fallback when only node samples exist (externally supplied control files):
// midpoints by averaging the step's endpoint samples of the common channel.
inline HalfGridControls sample_controls_halfgrid(const TimeGrid& grid, const SwitchingControlSet& cs) {
    require(cs.nodes() == grid.nodes(), "sample_controls_halfgrid: control/grid mismatch");
    const Index n = cs.channels();
    HalfGridControls hg;
    hg.u.resize(static_cast<size_t>(n));
    hg.active.resize(static_cast<size_t>(2 * grid.steps + 1));
    for (Index i = 0; i < n; ++i)
        hg.u[static_cast<size_t>(i)].resize(static_cast<size_t>(2 * grid.steps + 1));
    for (Index k = 0; k <= grid.steps; ++k) {
        hg.active[static_cast<size_t>(2 * k)] = cs.active[static_cast<size_t>(k)];
        for (Index i = 0; i < n; ++i)
            hg.u[static_cast<size_t>(i)][static_cast<size_t>(2 * k)] = cs.controls[static_cast<size_t>(i)][static_cast<size_t>(k)];
    }
    for (Index k = 0; k < grid.steps; ++k) {
        const size_t j = static_cast<size_t>(2 * k + 1);
        const Index il = cs.active[static_cast<size_t>(k)];
        hg.active[j] = il;
        for (Index i = 0; i < n; ++i) {
            const auto& a = cs.controls[static_cast<size_t>(i)][static_cast<size_t>(k)];
            const auto& b = cs.controls[static_cast<size_t>(i)][static_cast<size_t>(k + 1)];
            hg.u[static_cast<size_t>(i)][j] = 0.5 * (a + b);
        }
    }
    return hg;
}

namespace detail {

// cubic interpolation of node samples at the midpoint of step k
inline Vector midpoint_cubic(const std::vector<Vector>& f, Index k, Index n_steps) {
    if (n_steps < 3) {  // two steps: quadratic through the three nodes
        const double x = static_cast<double>(k) + 0.5;
        const double l0 = (x - 1.0) * (x - 2.0) / 2.0;
        const double l1 = -x * (x - 2.0);
        const double l2 = x * (x - 1.0) / 2.0;
        return l0 * f[0] + l1 * f[1] + l2 * f[2];
    }
    Index base = k - 1;
    double x = 1.5;  // midpoint position relative to the stencil start
    if (k == 0) {
        base = 0;
        x = 0.5;
    } else if (k == n_steps - 1) {
        base = n_steps - 3;
        x = 2.5;
    }
    double c[4];
    for (int s = 0; s < 4; ++s) {
        c[s] = 1.0;
        for (int t = 0; t < 4; ++t) {
            if (t == s) continue;
            c[s] *= (x - t) / static_cast<double>(s - t);
        }
    }
    Vector out = c[0] * f[static_cast<size_t>(base)];
    for (int s = 1; s < 4; ++s) out += c[s] * f[static_cast<size_t>(base + s)];
    return out;
}

}  // namespace detail

// Exponential integrator: the homogeneous flow is advanced by expm(-hA)
// exactly; the inhomogeneity is integrated by Simpson on each step, with
// midpoint forcing taken from the half-grid control samples. Panels whose
// active channel changes fall back to the node-based composite rule (the
// same rule the dual functional uses), so a discontinuous forcing is never
// sampled at an off-node point.
inline Trajectory integrate_forward(const LtiSystem& sys, const TimeGrid& grid,
                                    const SwitchingControlSet& cs, const HalfGridControls& hg,
                                    const Vector& y0,
                                    const std::vector<Vector>& f_nodes = {}) {
    require(y0.size() == sys.dim(), "integrate_forward: y0 dimension mismatch");
    require(cs.nodes() == grid.nodes(), "integrate_forward: controls sampled on a different grid");
    require(hg.samples() == 2 * grid.steps + 1, "integrate_forward: half-grid sample count mismatch");
    const bool with_source = !f_nodes.empty();
    if (with_source)
        require(static_cast<Index>(f_nodes.size()) == grid.nodes(),
                "integrate_forward: source samples must match the grid");

    const Index n = cs.channels();
    const double h = grid.dt();
    const Matrix e_full = expm(-h * sys.a);
    const Matrix e_half = expm(-(h / 2.0) * sys.a);
    const Matrix e_two = e_full * e_full;

    auto forcing_at = [&](Index j) {  // half-grid index
        Vector g = Vector::Zero(sys.dim());
        for (Index i = 0; i < n; ++i) {
            const Vector& ui = hg.u[static_cast<size_t>(i)][static_cast<size_t>(j)];
            if (ui.squaredNorm() > 0.0) g.noalias() += sys.blocks[static_cast<size_t>(i)] * ui;
        }
        if (with_source) {
            if (j % 2 == 0)
                g += f_nodes[static_cast<size_t>(j / 2)];
            else
                g += detail::midpoint_cubic(f_nodes, j / 2, grid.steps);
        }
        return g;
    };

    Trajectory traj;
    traj.y.resize(static_cast<size_t>(grid.nodes()));
    traj.y[0] = y0;
    for (Index p = 0; 2 * p < grid.steps; ++p) {
        const Index k = 2 * p;
        const bool smooth = cs.active[static_cast<size_t>(k)] == cs.active[static_cast<size_t>(k + 1)] &&
                            cs.active[static_cast<size_t>(k + 1)] == cs.active[static_cast<size_t>(k + 2)];
        const Vector g0 = forcing_at(2 * k);
        const Vector g1 = forcing_at(2 * k + 2);
        const Vector g2 = forcing_at(2 * k + 4);
        if (smooth) {
            const Vector gm0 = forcing_at(2 * k + 1);
            const Vector gm1 = forcing_at(2 * k + 3);
            traj.y[static_cast<size_t>(k + 1)] =
                e_full * traj.y[static_cast<size_t>(k)] +
                (h / 6.0) * (e_full * g0 + 4.0 * (e_half * gm0) + g1);
            traj.y[static_cast<size_t>(k + 2)] =
                e_full * traj.y[static_cast<size_t>(k + 1)] +
                (h / 6.0) * (e_full * g1 + 4.0 * (e_half * gm1) + g2);
        } else {
            // display value for the interior node; the panel update below
            // does not depend on it
            traj.y[static_cast<size_t>(k + 1)] =
                e_full * traj.y[static_cast<size_t>(k)] + (h / 2.0) * (e_full * g0 + g1);
            traj.y[static_cast<size_t>(k + 2)] =
                e_two * traj.y[static_cast<size_t>(k)] +
                (h / 3.0) * (e_two * g0 + 4.0 * (e_full * g1) + g2);
        }
    }
    traj.terminal_norm = traj.y[static_cast<size_t>(grid.steps)].norm();
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k <= grid.steps; ++k)
            traj.control_cost += grid.weight(k) * cs.controls[static_cast<size_t>(i)][static_cast<size_t>(k)].squaredNorm();
    return traj;
}

inline Trajectory integrate_forward(const LtiSystem& sys, const TimeGrid& grid,
                                    const SwitchingControlSet& cs, const Vector& y0,
                                    const std::vector<Vector>& f_nodes = {}) {
    return integrate_forward(sys, grid, cs, sample_controls_halfgrid(grid, cs), y0, f_nodes);
}

// Consistency certificate behind the synthesis: for arbitrary terminal data
// z_T the pairing <y(T), z_T> must match <y0, z(0)> plus the quadrature of
// sum_i <u_i, B_i^T z> (+ <f, z>), with the same weights the functional uses.
inline double duality_check(const LtiSystem& sys, const TimeGrid& grid,
                            const SwitchingControlSet& cs, const Vector& y0,
                            const Trajectory& traj, Index probes = 20,
                            std::uint64_t seed = 20240001,
                            const std::vector<Vector>& f_nodes = {}) {
    require(traj.nodes() == grid.nodes(), "duality_check: trajectory/grid mismatch");
    Rng rng(seed);
    const Index d = sys.dim();
    double worst = 0.0;
    for (Index p = 0; p < probes; ++p) {
        const Vector z_terminal = rng.unit_vector(d);
        const AdjointTrace z = propagate_adjoint(sys, grid, z_terminal);
        double rhs = y0.dot(z.z[0]);
        for (Index k = 0; k <= grid.steps; ++k) {
            const double wk = grid.weight(k);
            for (Index i = 0; i < cs.channels(); ++i)
                rhs += wk * cs.controls[static_cast<size_t>(i)][static_cast<size_t>(k)]
                                .dot(z.traces[static_cast<size_t>(i)][static_cast<size_t>(k)]);
            if (!f_nodes.empty()) rhs += wk * f_nodes[static_cast<size_t>(k)].dot(z.z[static_cast<size_t>(k)]);
        }
        const double lhs = traj.y[static_cast<size_t>(grid.steps)].dot(z_terminal);
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

}  // namespace switchctl
