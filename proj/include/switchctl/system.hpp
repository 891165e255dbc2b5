#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "switchctl/linalg.hpp"
#include "switchctl/matrix.hpp"

namespace switchctl {

enum class Structure { general, self_adjoint };

// The controlled pair (A, [B_1 ... B_n]) for y' + A y = sum_i B_i u_i.
// The control space splits into n blocks; block i has width m_i and the
// isomorphism onto the full control space is plain column concatenation.
struct LtiSystem {
    Matrix a;                    // d x d
    std::vector<Matrix> blocks;  // each d x m_i
    std::string label;
    Structure structure = Structure::general;

    Index dim() const { return a.rows(); }
    Index num_blocks() const { return static_cast<Index>(blocks.size()); }
    Index block_dim(Index i) const { return blocks[static_cast<size_t>(i)].cols(); }
    Index total_inputs() const {
        Index m = 0;
        for (const auto& b : blocks) m += b.cols();
        return m;
    }

    Matrix concatenated_inputs() const {
        Matrix b(dim(), total_inputs());
        Index col = 0;
        for (const auto& bi : blocks) {
            b.middleCols(col, bi.cols()) = bi;
            col += bi.cols();
        }
        return b;
    }
};

inline void validate(const LtiSystem& sys) {
    require_square_finite(sys.a, "LtiSystem");
    require(!sys.blocks.empty(), "LtiSystem: at least one input block required");
    for (const auto& b : sys.blocks) {
        require(b.rows() == sys.a.rows(), "LtiSystem: input block row count must match state dimension");
        require(b.cols() >= 1, "LtiSystem: input block must have at least one column");
        require(b.allFinite(), "LtiSystem: input block has non-finite entries");
    }
    if (sys.structure == Structure::self_adjoint) {
        const double scale = sys.a.norm();
        require((sys.a - sys.a.transpose()).norm() <= 1e-12 * (scale > 0 ? scale : 1.0),
                "LtiSystem: self_adjoint flag requires a symmetric A");
        Eigen::SelfAdjointEigenSolver<Matrix> es(sys.a, Eigen::EigenvaluesOnly);
        require(es.eigenvalues().minCoeff() > 0.0,
                "LtiSystem: self_adjoint flag requires a positive definite A");
    }
}

struct KalmanResult {
    bool controllable = false;
    Index rank = 0;
};

// Rank of [B, AB, ..., A^{d-1}B]. Columns are normalized before the rank
// test so that large powers of A do not swamp the singular value threshold
// (column scaling leaves the rank unchanged).
inline KalmanResult kalman_check(const LtiSystem& sys, double tol = 1e-10) {
    const Index d = sys.dim();
    const Matrix b = sys.concatenated_inputs();
    const Index m = b.cols();
    Matrix k(d, d * m);
    Matrix power = b;
    for (Index j = 0; j < d; ++j) {
        k.middleCols(j * m, m) = power;
        if (j + 1 < d) power = sys.a * power;
    }
    for (Index c = 0; c < k.cols(); ++c) {
        const double nrm = k.col(c).norm();
        if (nrm > 0.0) k.col(c) /= nrm;
    }
    KalmanResult res;
    res.rank = numerical_rank(k, tol);
    res.controllable = (res.rank == d);
    return res;
}

}  // namespace switchctl
