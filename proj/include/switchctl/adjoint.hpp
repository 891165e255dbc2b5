#pragma once

#include <vector>

#include "switchctl/grid.hpp"
#include "switchctl/linalg.hpp"
#include "switchctl/system.hpp"

namespace switchctl {

// Linear maps z_T -> z(t_k) for the adjoint flow -z' + A^T z = 0, z(T) = z_T,
// i.e. Phi_k = expm(A^T (t_k - T)). Built once per (system, grid) from the
// single step matrix expm(-h A^T); the only error source is expm itself.
struct PropagatorStack {
    std::vector<Matrix> phi;           // phi[k], k = 0..N, phi[N] = I
    std::vector<std::vector<Matrix>> channel_maps;  // channel_maps[i][k] = B_i^T phi[k]

    Index nodes() const { return static_cast<Index>(phi.size()); }
};

inline PropagatorStack propagator_stack(const LtiSystem& sys, const TimeGrid& grid) {
    const Index d = sys.dim();
    const Index n_nodes = grid.nodes();
    const Matrix step = expm(-grid.dt() * sys.a.transpose());

    PropagatorStack stack;
    stack.phi.resize(static_cast<size_t>(n_nodes));
    stack.phi[static_cast<size_t>(grid.steps)] = Matrix::Identity(d, d);
    for (Index k = grid.steps - 1; k >= 0; --k)
        stack.phi[static_cast<size_t>(k)] = step * stack.phi[static_cast<size_t>(k + 1)];

    stack.channel_maps.resize(static_cast<size_t>(sys.num_blocks()));
    for (Index i = 0; i < sys.num_blocks(); ++i) {
        auto& maps = stack.channel_maps[static_cast<size_t>(i)];
        maps.resize(static_cast<size_t>(n_nodes));
        const Matrix bt = sys.blocks[static_cast<size_t>(i)].transpose();
        for (Index k = 0; k < n_nodes; ++k) maps[static_cast<size_t>(k)] = bt * stack.phi[static_cast<size_t>(k)];
    }
    return stack;
}

// Sampled adjoint trajectory z(t_k) and the per-block observation traces
// eta_i[k] = B_i^T z(t_k).
struct AdjointTrace {
    std::vector<Vector> z;                     // z[k], k = 0..N
    std::vector<std::vector<Vector>> traces;   // traces[i][k]

    Index nodes() const { return static_cast<Index>(z.size()); }
};

inline AdjointTrace propagate_adjoint(const LtiSystem& sys, const TimeGrid& grid,
                                      const Vector& z_terminal) {
    require(z_terminal.size() == sys.dim(), "propagate_adjoint: terminal datum dimension mismatch");
    require(z_terminal.allFinite(), "propagate_adjoint: terminal datum has non-finite entries");

    const Matrix step = expm(-grid.dt() * sys.a.transpose());
    AdjointTrace trace;
    trace.z.resize(static_cast<size_t>(grid.nodes()));
    trace.z[static_cast<size_t>(grid.steps)] = z_terminal;
    for (Index k = grid.steps - 1; k >= 0; --k)
        trace.z[static_cast<size_t>(k)] = step * trace.z[static_cast<size_t>(k + 1)];

    trace.traces.resize(static_cast<size_t>(sys.num_blocks()));
    for (Index i = 0; i < sys.num_blocks(); ++i) {
        auto& tr = trace.traces[static_cast<size_t>(i)];
        tr.resize(static_cast<size_t>(grid.nodes()));
        const Matrix bt = sys.blocks[static_cast<size_t>(i)].transpose();
        for (Index k = 0; k <= grid.steps; ++k) tr[static_cast<size_t>(k)] = bt * trace.z[static_cast<size_t>(k)];
    }
    return trace;
}

// Same trajectory but read off a prebuilt stack; used by the functional so
// repeated evaluations share the expm work.
inline AdjointTrace propagate_adjoint(const LtiSystem& sys, const PropagatorStack& stack,
                                      const Vector& z_terminal) {
    require(z_terminal.size() == sys.dim(), "propagate_adjoint: terminal datum dimension mismatch");
    AdjointTrace trace;
    const Index n_nodes = stack.nodes();
    trace.z.resize(static_cast<size_t>(n_nodes));
    for (Index k = 0; k < n_nodes; ++k) trace.z[static_cast<size_t>(k)] = stack.phi[static_cast<size_t>(k)] * z_terminal;
    trace.traces.resize(static_cast<size_t>(sys.num_blocks()));
    for (Index i = 0; i < sys.num_blocks(); ++i) {
        auto& tr = trace.traces[static_cast<size_t>(i)];
        tr.resize(static_cast<size_t>(n_nodes));
        for (Index k = 0; k < n_nodes; ++k)
            tr[static_cast<size_t>(k)] = stack.channel_maps[static_cast<size_t>(i)][static_cast<size_t>(k)] * z_terminal;
    }
    return trace;
}

}  // namespace switchctl
