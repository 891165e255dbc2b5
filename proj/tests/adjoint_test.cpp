#include "switchctl/adjoint.hpp"

#include <gtest/gtest.h>

#include "switchctl/models.hpp"
#include "switchctl/rng.hpp"

using namespace switchctl;

namespace {

LtiSystem with_matrix(const Matrix& a) {
    LtiSystem sys;
    sys.a = a;
    sys.blocks = {Matrix::Identity(a.rows(), a.cols())};
    sys.label = "test";
    return sys;
}

}  // namespace

TEST(Adjoint, ZeroMatrixGivesConstantSolution) {
    const LtiSystem sys = with_matrix(Matrix::Zero(3, 3));
    const TimeGrid grid(1.0, 10);
    Rng rng(31);
    const Vector zt = rng.normal_vector(3);
    const AdjointTrace trace = propagate_adjoint(sys, grid, zt);
    for (Index k = 0; k <= grid.steps; ++k) EXPECT_LT((trace.z[static_cast<size_t>(k)] - zt).norm(), 1e-14);
}

TEST(Adjoint, ScalarExponential) {
    const double a = 0.8, T = 1.5;
    const LtiSystem sys = with_matrix(Matrix(a * Matrix::Identity(2, 2)));
    const TimeGrid grid(T, 20);
    Rng rng(32);
    const Vector zt = rng.normal_vector(2);
    const AdjointTrace trace = propagate_adjoint(sys, grid, zt);
    for (Index k = 0; k <= grid.steps; ++k) {
        const Vector expect = std::exp(a * (grid.node(k) - T)) * zt;
        EXPECT_LT((trace.z[static_cast<size_t>(k)] - expect).norm(), 1e-12 * zt.norm());
    }
}

TEST(Adjoint, SkewSymmetricPreservesNorm) {
    Rng rng(33);
    Matrix a = rng.uniform_matrix(4, 4);
    a = Matrix(a - a.transpose());
    const LtiSystem sys = with_matrix(a);
    const TimeGrid grid(2.0, 50);
    const Vector zt = rng.unit_vector(4);
    const AdjointTrace trace = propagate_adjoint(sys, grid, zt);
    for (Index k = 0; k <= grid.steps; ++k)
        EXPECT_NEAR(trace.z[static_cast<size_t>(k)].norm(), 1.0, 1e-10);
}

TEST(Adjoint, TerminalDatumExact) {
    const LtiSystem sys = make_heat(3, 1.0);
    const TimeGrid grid(1.0, 16);
    Rng rng(34);
    const Vector zt = rng.normal_vector(3);
    const AdjointTrace trace = propagate_adjoint(sys, grid, zt);
    EXPECT_EQ((trace.z[static_cast<size_t>(grid.steps)] - zt).norm(), 0.0);
}

TEST(Adjoint, TracesAreBlockProjections) {
    const LtiSystem sys = make_heat(4, 1.0);
    const TimeGrid grid(0.5, 12);
    Rng rng(35);
    const AdjointTrace trace = propagate_adjoint(sys, grid, rng.normal_vector(4));
    for (Index i = 0; i < sys.num_blocks(); ++i)
        for (Index k = 0; k <= grid.steps; ++k) {
            const Vector expect = sys.blocks[static_cast<size_t>(i)].transpose() * trace.z[static_cast<size_t>(k)];
            EXPECT_EQ((trace.traces[static_cast<size_t>(i)][static_cast<size_t>(k)] - expect).norm(), 0.0);
        }
}

TEST(PropagatorStack, IdentityAtTerminalNode) {
    const LtiSystem sys = make_heat(3, 2.0);
    const TimeGrid grid(1.0, 8);
    const PropagatorStack stack = propagator_stack(sys, grid);
    EXPECT_EQ((stack.phi[static_cast<size_t>(grid.steps)] - Matrix::Identity(3, 3)).norm(), 0.0);
}

TEST(PropagatorStack, ScalarCase) {
    const double a = -0.4, T = 1.0;
    const LtiSystem sys = with_matrix(Matrix(a * Matrix::Identity(2, 2)));
    const TimeGrid grid(T, 10);
    const PropagatorStack stack = propagator_stack(sys, grid);
    for (Index k = 0; k <= grid.steps; ++k) {
        const Matrix expect = std::exp(a * (grid.node(k) - T)) * Matrix::Identity(2, 2);
        EXPECT_LT((stack.phi[static_cast<size_t>(k)] - expect).norm(), 1e-13);
    }
}

TEST(PropagatorStack, ConsistentWithPropagation) {
    Rng rng(36);
    const LtiSystem sys = with_matrix(rng.uniform_matrix(5, 5));
    const TimeGrid grid(1.0, 40);
    const PropagatorStack stack = propagator_stack(sys, grid);
    const Vector zt = rng.normal_vector(5);
    const AdjointTrace trace = propagate_adjoint(sys, grid, zt);
    for (Index k = 0; k <= grid.steps; ++k) {
        const Vector via_stack = stack.phi[static_cast<size_t>(k)] * zt;
        EXPECT_LT((via_stack - trace.z[static_cast<size_t>(k)]).norm(), 1e-12 * std::max(1.0, zt.norm()));
    }
}

TEST(Adjoint, Linearity) {
    Rng rng(37);
    const LtiSystem sys = with_matrix(rng.uniform_matrix(4, 4));
    const TimeGrid grid(1.0, 30);
    const Vector z1 = rng.normal_vector(4);
    const Vector z2 = rng.normal_vector(4);
    const double c = 1.7;
    const AdjointTrace t1 = propagate_adjoint(sys, grid, z1);
    const AdjointTrace t2 = propagate_adjoint(sys, grid, z2);
    const AdjointTrace t12 = propagate_adjoint(sys, grid, Vector(z1 + c * z2));
    for (Index k = 0; k <= grid.steps; ++k) {
        const Vector combo = t1.z[static_cast<size_t>(k)] + c * t2.z[static_cast<size_t>(k)];
        EXPECT_LT((t12.z[static_cast<size_t>(k)] - combo).norm(), 1e-13 * std::max(1.0, combo.norm()));
    }
}

TEST(Adjoint, GridRefinementConsistency) {
    const LtiSystem sys = make_heat(4, 1.0);
    const TimeGrid coarse(1.0, 20), fine(1.0, 40);
    Rng rng(38);
    const Vector zt = rng.normal_vector(4);
    const AdjointTrace tc = propagate_adjoint(sys, coarse, zt);
    const AdjointTrace tf = propagate_adjoint(sys, fine, zt);
    for (Index k = 0; k <= coarse.steps; ++k) {
        const Vector& a = tc.z[static_cast<size_t>(k)];
        const Vector& b = tf.z[static_cast<size_t>(2 * k)];
        EXPECT_LT((a - b).norm(), 1e-11 * std::max(1.0, a.norm()));
    }
}

TEST(Adjoint, DimensionMismatchRejected) {
    const LtiSystem sys = make_heat(3, 1.0);
    const TimeGrid grid(1.0, 8);
    EXPECT_THROW(propagate_adjoint(sys, grid, Vector(Vector::Zero(4))), std::invalid_argument);
}

TEST(TimeGrid, SimpsonWeightsSumToHorizon) {
    for (Index n : {2, 10, 23, 2000}) {
        const TimeGrid grid(1.3, n);
        EXPECT_EQ(grid.steps % 2, 0);
        double sum = 0.0;
        for (Index k = 0; k <= grid.steps; ++k) sum += grid.weight(k);
        EXPECT_NEAR(sum, 1.3, 1e-12 * 1.3);
    }
    EXPECT_THROW(TimeGrid(0.0, 10), std::invalid_argument);
    EXPECT_THROW(TimeGrid(1.0, 1), std::invalid_argument);
}
