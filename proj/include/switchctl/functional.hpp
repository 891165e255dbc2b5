#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "switchctl/adjoint.hpp"
#include "switchctl/frequencies.hpp"
#include "switchctl/grid.hpp"
#include "switchctl/system.hpp"

namespace switchctl {

enum class Variant { exact, approximate, source };

// The dual functional
//   J(z_T) = 1/2 int_0^T max_i alpha_i(t) |B_i^T z(t)|^2 dt + <y0, z(0)>
// discretized with the grid's Simpson weights, plus the approximate-variant
// penalty eps*|z_T| or the source term int <f, z>.
struct Objective {
    LtiSystem sys;
    TimeGrid grid;
    WeightFamily weights;
    Vector y0;
    Variant variant = Variant::exact;
    double epsilon = 0.0;
    std::vector<Vector> source;  // node samples of f, size N+1 (source variant)

    // cached discretization data
    PropagatorStack stack;
    std::vector<double> quad_weights;
    std::vector<std::vector<double>> alpha_at;  // alpha_at[i][k]
    Vector linear_term;                         // Phi_0^T y0 (+ sum_k w_k Phi_k^T f_k)

    Index dim() const { return sys.dim(); }
    Index channels() const { return sys.num_blocks(); }
};

inline Objective make_objective(LtiSystem sys, const TimeGrid& grid, WeightFamily weights,
                                Vector y0, Variant variant = Variant::exact,
                                double epsilon = 0.0, std::vector<Vector> source = {}) {
    validate(sys);
    require(y0.size() == sys.dim(), "Objective: y0 dimension mismatch");
    require(weights.size() == sys.num_blocks(), "Objective: one weight per control block");
    if (variant == Variant::approximate)
        require(epsilon > 0.0, "Objective: approximate variant needs epsilon > 0");
    if (variant == Variant::source) {
        require(static_cast<Index>(source.size()) == grid.nodes(),
                "Objective: source samples must match the grid nodes");
        for (const auto& f : source)
            require(f.size() == sys.dim() && f.allFinite(), "Objective: bad source sample");
    }

    Objective obj;
    obj.sys = std::move(sys);
    obj.grid = grid;
    obj.weights = std::move(weights);
    obj.y0 = std::move(y0);
    obj.variant = variant;
    obj.epsilon = (variant == Variant::approximate) ? epsilon : 0.0;
    obj.source = std::move(source);

    obj.stack = propagator_stack(obj.sys, grid);
    obj.quad_weights = grid.weights();
    obj.alpha_at.assign(static_cast<size_t>(obj.channels()),
                        std::vector<double>(static_cast<size_t>(grid.nodes())));
    for (Index i = 0; i < obj.channels(); ++i)
        for (Index k = 0; k <= grid.steps; ++k)
            obj.alpha_at[static_cast<size_t>(i)][static_cast<size_t>(k)] = obj.weights.alpha(i, grid.node(k));

    obj.linear_term = obj.stack.phi[0].transpose() * obj.y0;
    if (obj.variant == Variant::source) {
        for (Index k = 0; k <= grid.steps; ++k)
            obj.linear_term += obj.quad_weights[static_cast<size_t>(k)] *
                               (obj.stack.phi[static_cast<size_t>(k)].transpose() * obj.source[static_cast<size_t>(k)]);
    }
    return obj;
}

namespace detail {

// weighted channel energies q_i(k) = alpha_i(t_k) |B_i^T z(t_k)|^2
inline void channel_energies(const Objective& obj, const Vector& z, Index k,
                             std::vector<Vector>& etas, std::vector<double>& q) {
    const Index n = obj.channels();
    for (Index i = 0; i < n; ++i) {
        etas[static_cast<size_t>(i)].noalias() =
            obj.stack.channel_maps[static_cast<size_t>(i)][static_cast<size_t>(k)] * z;
        q[static_cast<size_t>(i)] = obj.alpha_at[static_cast<size_t>(i)][static_cast<size_t>(k)] *
                                    etas[static_cast<size_t>(i)].squaredNorm();
    }
}

inline Index argmax_smallest_tie(const std::vector<double>& q) {
    Index best = 0;
    for (size_t i = 1; i < q.size(); ++i)
        if (q[i] > q[best]) best = static_cast<Index>(i);
    return best;
}

}  // namespace detail

inline double eval_J(const Objective& obj, const Vector& z) {
    require(z.size() == obj.dim(), "eval_J: argument dimension mismatch");
    const Index n = obj.channels();
    std::vector<Vector> etas(static_cast<size_t>(n));
    std::vector<double> q(static_cast<size_t>(n));
    double quad = 0.0;
    for (Index k = 0; k <= obj.grid.steps; ++k) {
        detail::channel_energies(obj, z, k, etas, q);
        quad += obj.quad_weights[static_cast<size_t>(k)] * q[static_cast<size_t>(detail::argmax_smallest_tie(q))];
    }
    double value = 0.5 * quad + obj.linear_term.dot(z);
    if (obj.variant == Variant::approximate) value += obj.epsilon * z.norm();
    return value;
}

// A subgradient of the discretized J: the active-channel Gramian applied to
// z plus the linear term; ties resolved toward the smallest channel index.
// For the approximate variant at z = 0 the returned element omits the
// penalty term and *at_kink is set.
inline Vector subgradient_J(const Objective& obj, const Vector& z, bool* at_kink = nullptr) {
    require(z.size() == obj.dim(), "subgradient_J: argument dimension mismatch");
    if (at_kink) *at_kink = false;
    const Index n = obj.channels();
    std::vector<Vector> etas(static_cast<size_t>(n));
    std::vector<double> q(static_cast<size_t>(n));
    Vector g = obj.linear_term;
    for (Index k = 0; k <= obj.grid.steps; ++k) {
        detail::channel_energies(obj, z, k, etas, q);
        const Index i = detail::argmax_smallest_tie(q);
        const auto& map = obj.stack.channel_maps[static_cast<size_t>(i)][static_cast<size_t>(k)];
        g.noalias() += (obj.quad_weights[static_cast<size_t>(k)] *
                        obj.alpha_at[static_cast<size_t>(i)][static_cast<size_t>(k)]) *
                       (map.transpose() * etas[static_cast<size_t>(i)]);
    }
    if (obj.variant == Variant::approximate) {
        const double nz = z.norm();
        if (nz > 0.0) {
            g += (obj.epsilon / nz) * z;
        } else if (at_kink) {
            *at_kink = true;
        }
    }
    return g;
}

// Optimality certificate: the max canonical component of the Euler-Lagrange
// pairing, normalized by |y0| plus the magnitude of the quadratic term. For
// the approximate variant at z = 0 the distance from 0 to the subdifferential
// replaces the plain subgradient norm.
inline double el_residual(const Objective& obj, const Vector& z) {
    require(z.size() == obj.dim(), "el_residual: argument dimension mismatch");
    const Index n = obj.channels();
    std::vector<Vector> etas(static_cast<size_t>(n));
    std::vector<double> q(static_cast<size_t>(n));
    double quad_mag = 0.0;
    Vector g = obj.linear_term;
    for (Index k = 0; k <= obj.grid.steps; ++k) {
        detail::channel_energies(obj, z, k, etas, q);
        const Index i = detail::argmax_smallest_tie(q);
        const double wk = obj.quad_weights[static_cast<size_t>(k)];
        quad_mag += wk * q[static_cast<size_t>(i)];
        const auto& map = obj.stack.channel_maps[static_cast<size_t>(i)][static_cast<size_t>(k)];
        g.noalias() += (wk * obj.alpha_at[static_cast<size_t>(i)][static_cast<size_t>(k)]) *
                       (map.transpose() * etas[static_cast<size_t>(i)]);
    }
    double raw;
    if (obj.variant == Variant::approximate) {
        const double nz = z.norm();
        if (nz > 0.0) {
            g += (obj.epsilon / nz) * z;
            raw = g.lpNorm<Eigen::Infinity>();
        } else {
            raw = std::max(0.0, g.norm() - obj.epsilon);
        }
    } else {
        raw = g.lpNorm<Eigen::Infinity>();
    }
    const double den = obj.y0.norm() + quad_mag;
    if (den == 0.0) return raw == 0.0 ? 0.0 : raw / 1e-300;
    return raw / den;
}

}  // namespace switchctl
