#pragma once

#include <deque>
#include <vector>

#include "switchctl/minimize.hpp"
#include "switchctl/simulate.hpp"
#include "switchctl/switching.hpp"

namespace switchctl {

// Crossing-resolved quadrature: per-step Simpson everywhere, with steps that
// straddle an active-channel crossing split at the bisected crossing time.
// Used by the optional refinement pass; the default pipeline keeps the
// node-aligned rule that pairs exactly with the discrete functional.
struct ResolvedQuadrature {
    struct Point {
        double t;
        double weight;
        Index channel;
    };
    std::vector<Point> points;
    std::vector<double> crossings;  // one refined time per switch step
};

namespace detail {

inline void append_simpson(std::vector<ResolvedQuadrature::Point>& pts, double a, double b,
                           Index channel) {
    const double w = (b - a) / 6.0;
    pts.push_back({a, w, channel});
    pts.push_back({0.5 * (a + b), 4.0 * w, channel});
    pts.push_back({b, w, channel});
}

}  // namespace detail

inline ResolvedQuadrature build_resolved_quadrature(const LtiSystem& sys, const TimeGrid& grid,
                                                    const AdjointTrace& trace,
                                                    const WeightFamily& weights,
                                                    const ActivePartition& part) {
    ResolvedQuadrature quad;
    quad.crossings = refine_switch_times(sys, grid, trace, weights, part);
    size_t next_crossing = 0;
    for (Index k = 0; k < grid.steps; ++k) {
        const Index i = part.active[static_cast<size_t>(k)];
        const Index j = part.active[static_cast<size_t>(k + 1)];
        const double a = grid.node(k), b = grid.node(k + 1);
        if (i == j) {
            detail::append_simpson(quad.points, a, b, i);
        } else {
            const double tau = quad.crossings[next_crossing++];
            if (tau > a) detail::append_simpson(quad.points, a, tau, i);
            if (b > tau) detail::append_simpson(quad.points, tau, b, j);
        }
    }
    return quad;
}

namespace detail {

// Lagrange cubic evaluation of node samples at an arbitrary time
inline Vector cubic_at(const std::vector<Vector>& f, double t, const TimeGrid& grid) {
    const double pos = t / grid.dt();
    Index k = static_cast<Index>(pos);
    if (k >= grid.steps) k = grid.steps - 1;
    if (k < 0) k = 0;
    if (grid.steps < 3) {
        const double x = pos;
        const double l0 = (x - 1.0) * (x - 2.0) / 2.0;
        const double l1 = -x * (x - 2.0);
        const double l2 = x * (x - 1.0) / 2.0;
        return l0 * f[0] + l1 * f[1] + l2 * f[2];
    }
    const Index base = std::clamp<Index>(k - 1, 0, grid.steps - 3);
    const double x = pos - static_cast<double>(base);
    double c[4];
    for (int s = 0; s < 4; ++s) {
        c[s] = 1.0;
        for (int r = 0; r < 4; ++r) {
            if (r == s) continue;
            c[s] *= (x - r) / static_cast<double>(s - r);
        }
    }
    Vector out = c[0] * f[static_cast<size_t>(base)];
    for (int s = 1; s < 4; ++s) out += c[s] * f[static_cast<size_t>(base + s)];
    return out;
}

}  // namespace detail

// Gramian and linear term of the dual functional under the resolved
// quadrature; the adjoint flow is evaluated analytically at every point.
inline void assemble_resolved_system(const Objective& obj, const ResolvedQuadrature& quad,
                                     Matrix& gram, Vector& rhs) {
    const Index d = obj.dim();
    const double horizon = obj.grid.horizon;
    gram = Matrix::Zero(d, d);
    rhs = obj.stack.phi[0].transpose() * obj.y0;
    for (const auto& p : quad.points) {
        const Matrix flow = expm(Matrix((p.t - horizon) * obj.sys.a.transpose()));
        const Matrix map = obj.sys.blocks[static_cast<size_t>(p.channel)].transpose() * flow;
        const double alpha = obj.weights.alpha(p.channel, p.t);
        gram.noalias() += (p.weight * alpha) * (map.transpose() * map);
        if (obj.variant == Variant::source) {
            rhs.noalias() += p.weight * (flow.transpose() * detail::cubic_at(obj.source, p.t, obj.grid));
        }
    }
}

namespace detail {

struct ResolvedSystem {
    Matrix gram;
    Vector rhs;
    double value = 0.0;  // resolved functional at the expansion point
    double score = 0.0;  // |gram z + rhs| there (its gradient, by the envelope)
    bool degenerate = false;
};

inline ResolvedSystem assemble_at(const Objective& obj, const Vector& z, double tie_tol) {
    ResolvedSystem sys_out;
    const AdjointTrace trace = propagate_adjoint(obj.sys, obj.stack, z);
    const ActivePartition part = classify(trace, obj.weights, obj.grid, tie_tol);
    if (part.degenerate) {
        sys_out.degenerate = true;
        return sys_out;
    }
    const ResolvedQuadrature quad = build_resolved_quadrature(obj.sys, obj.grid, trace, obj.weights, part);
    assemble_resolved_system(obj, quad, sys_out.gram, sys_out.rhs);
    sys_out.value = 0.5 * z.dot(sys_out.gram * z) + sys_out.rhs.dot(z);
    sys_out.score = (sys_out.gram * z + sys_out.rhs).norm();
    return sys_out;
}

}  // namespace detail

// Minimize the dual functional under the crossing-resolved quadrature. The
// resolved functional is C^1 (the integrand is continuous at a crossing, so
// moving a crossing contributes nothing to the gradient); a limited-memory
// quasi-Newton loop with the quadrature rebuilt per evaluation descends
// reliably, and a score-guarded Newton phase finishes once the crossings
// stop moving.
inline Vector resolve_crossings_polish(const Objective& obj, const Vector& start, double tie_tol,
                                       int lbfgs_budget = 160, int newton_budget = 30) {
    Vector z = start;
    detail::ResolvedSystem cur = detail::assemble_at(obj, z, tie_tol);
    if (cur.degenerate) return start;
    Vector best = z;
    double best_score = cur.score;
    const double target = 1e-12 * (1.0 + obj.y0.norm());

    // phase 1: L-BFGS on the resolved functional
    {
        constexpr int kMemory = 8;
        std::deque<Vector> s_hist, y_hist;
        std::deque<double> rho_hist;
        Vector grad = cur.gram * z + cur.rhs;
        for (int it = 0; it < lbfgs_budget && best_score > target; ++it) {
            Vector dir = -grad;
            std::vector<double> alpha_coef(s_hist.size());
            for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
                alpha_coef[static_cast<size_t>(i)] =
                    rho_hist[static_cast<size_t>(i)] * s_hist[static_cast<size_t>(i)].dot(dir);
                dir -= alpha_coef[static_cast<size_t>(i)] * y_hist[static_cast<size_t>(i)];
            }
            if (!s_hist.empty()) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            for (size_t i = 0; i < s_hist.size(); ++i)
                dir += (alpha_coef[i] - rho_hist[i] * y_hist[i].dot(dir)) * s_hist[i];
            double slope = grad.dot(dir);
            if (slope >= 0.0) {
                dir = -grad;
                slope = -grad.squaredNorm();
            }
            double step = 1.0;
            detail::ResolvedSystem next;
            Vector z_next;
            bool accepted = false;
            for (int ls = 0; ls < 30; ++ls) {
                z_next = z + step * dir;
                next = detail::assemble_at(obj, z_next, tie_tol);
                if (!next.degenerate && next.value <= cur.value + 1e-4 * step * slope) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
            const Vector g_next = next.gram * z_next + next.rhs;
            const Vector s = z_next - z;
            const Vector y = g_next - grad;
            const double sy = s.dot(y);
            if (sy > 1e-14 * s.norm() * y.norm()) {
                s_hist.push_back(s);
                y_hist.push_back(y);
                rho_hist.push_back(1.0 / sy);
                if (static_cast<int>(s_hist.size()) > kMemory) {
                    s_hist.pop_front();
                    y_hist.pop_front();
                    rho_hist.pop_front();
                }
            }
            z = z_next;
            cur = next;
            grad = g_next;
            if (cur.score < best_score) {
                best_score = cur.score;
                best = z;
            }
        }
    }

    // phase 2: guarded Newton on the frozen system; quadratic once the
    // crossings settle
    double mu = 0.0;
    for (int round = 0; round < newton_budget && best_score > target; ++round) {
        const Matrix reg = cur.gram + mu * Matrix::Identity(obj.dim(), obj.dim());
        const Vector z_cand = detail::solve_spd(reg, Vector(mu * z - cur.rhs));
        const detail::ResolvedSystem cand = detail::assemble_at(obj, z_cand, tie_tol);
        if (cand.degenerate) break;
        if (cand.score < cur.score) {
            z = z_cand;
            cur = cand;
            mu *= 0.25;
            if (cur.score < best_score) {
                best_score = cur.score;
                best = z;
            }
        } else {
            mu = (mu == 0.0) ? 1e-6 * (cur.gram.trace() / static_cast<double>(obj.dim())) : 4.0 * mu;
            if (mu > 1e12 * (cur.gram.trace() + 1e-300)) break;
        }
    }
    return best;
}

// Duality certificate in resolved mode: the pairing <y(T), z_T> against the
// resolved quadrature of sum_i <u_i, B_i^T z> (+ <f, z>), which is the rule
// the refined run's optimality system uses.
inline double duality_check_resolved(const LtiSystem& sys, const TimeGrid& grid,
                                     const AdjointTrace& trace, const WeightFamily& weights,
                                     const ResolvedQuadrature& quad, const Vector& y0,
                                     const Trajectory& traj, Index probes = 20,
                                     std::uint64_t seed = 20240001,
                                     const std::vector<Vector>& f_nodes = {}) {
    require(traj.nodes() == grid.nodes(), "duality_check_resolved: trajectory/grid mismatch");
    const Index d = sys.dim();
    const double horizon = grid.horizon;
    const Vector& z_term = trace.z[static_cast<size_t>(grid.steps)];
    const bool degenerate = z_term.norm() == 0.0;

    // flows are shared between the control values and the probe traces
    const size_t n_pts = quad.points.size();
    std::vector<Matrix> flows(n_pts);
    std::vector<Vector> bu(n_pts);  // B_ch u_ch(t_p) + f(t_p)
    for (size_t p = 0; p < n_pts; ++p) {
        const auto& pt = quad.points[p];
        flows[p] = expm(Matrix((pt.t - horizon) * sys.a.transpose()));
        Vector g = Vector::Zero(d);
        if (!degenerate) {
            const Vector u = weights.alpha(pt.channel, pt.t) *
                             (sys.blocks[static_cast<size_t>(pt.channel)].transpose() * (flows[p] * z_term));
            g = sys.blocks[static_cast<size_t>(pt.channel)] * u;
        }
        if (!f_nodes.empty()) g += detail::cubic_at(f_nodes, pt.t, grid);
        bu[p] = g;
    }
    const Matrix phi0 = expm(Matrix(-horizon * sys.a.transpose()));

    Rng rng(seed);
    double worst = 0.0;
    for (Index pr = 0; pr < probes; ++pr) {
        const Vector z_probe = rng.unit_vector(d);
        double rhs = y0.dot(phi0 * z_probe);
        for (size_t p = 0; p < n_pts; ++p)
            rhs += quad.points[p].weight * bu[p].dot(flows[p] * z_probe);
        const double lhs = traj.y[static_cast<size_t>(grid.steps)].dot(z_probe);
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

// Exponential integrator matching the resolved quadrature: Simpson on each
// step, with straddle steps split at the refined crossing and the forcing
// evaluated from the analytic control formula on each side.
inline Trajectory integrate_forward_resolved(const LtiSystem& sys, const TimeGrid& grid,
                                             const SwitchingControlSet& cs, const AdjointTrace& trace,
                                             const WeightFamily& weights,
                                             const std::vector<double>& crossings, const Vector& y0,
                                             const std::vector<Vector>& f_nodes = {}) {
    require(y0.size() == sys.dim(), "integrate_forward_resolved: y0 dimension mismatch");
    require(cs.nodes() == grid.nodes(), "integrate_forward_resolved: control/grid mismatch");
    const double horizon = grid.horizon;
    const double h = grid.dt();
    const Matrix e_full = expm(Matrix(-h * sys.a));
    const bool with_source = !f_nodes.empty();

    auto forcing = [&](double t, Index channel, const Matrix& adj_flow) {
        // adj_flow = expm(A^T (t - T)); control from the analytic formula
        Vector g = Vector::Zero(sys.dim());
        if (!cs.degenerate) {
            const Vector z_t = adj_flow * trace.z[static_cast<size_t>(grid.steps)];
            const Vector u = weights.alpha(channel, t) *
                             (sys.blocks[static_cast<size_t>(channel)].transpose() * z_t);
            g.noalias() += sys.blocks[static_cast<size_t>(channel)] * u;
        }
        if (with_source) g += detail::cubic_at(f_nodes, t, grid);
        return g;
    };

    Trajectory traj;
    traj.y.resize(static_cast<size_t>(grid.nodes()));
    traj.y[0] = y0;
    size_t next_crossing = 0;
    for (Index k = 0; k < grid.steps; ++k) {
        const Index i = cs.active[static_cast<size_t>(k)];
        const Index j = cs.active[static_cast<size_t>(k + 1)];
        const double a = grid.node(k), b = grid.node(k + 1);
        Vector q = Vector::Zero(sys.dim());
        auto accumulate = [&](double lo, double hi, Index channel) {
            if (hi <= lo) return;
            const double w = (hi - lo) / 6.0;
            for (const auto& [t, coeff] : {std::pair{lo, w}, {0.5 * (lo + hi), 4.0 * w}, {hi, w}}) {
                const Matrix adj_flow = expm(Matrix((t - horizon) * sys.a.transpose()));
                // e^{-A (b - t)} is the transpose of the adjoint flow ratio
                const Matrix weight_mat = expm(Matrix(-(b - t) * sys.a));
                q.noalias() += coeff * (weight_mat * forcing(t, channel, adj_flow));
            }
        };
        if (i == j) {
            accumulate(a, b, i);
        } else {
            const double tau = crossings.at(next_crossing++);
            accumulate(a, tau, i);
            accumulate(tau, b, j);
        }
        traj.y[static_cast<size_t>(k + 1)] = e_full * traj.y[static_cast<size_t>(k)] + q;
    }
    traj.terminal_norm = traj.y[static_cast<size_t>(grid.steps)].norm();
    for (Index i = 0; i < cs.channels(); ++i)
        for (Index k = 0; k <= grid.steps; ++k)
            traj.control_cost += grid.weight(k) * cs.controls[static_cast<size_t>(i)][static_cast<size_t>(k)].squaredNorm();
    return traj;
}

}  // namespace switchctl
