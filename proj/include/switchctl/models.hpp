#pragma once

#include <string>

#include "switchctl/rng.hpp"
#include "switchctl/system.hpp"

namespace switchctl {

// Finite difference semidiscretization of the 1-d heat equation on (0, L)
// with Dirichlet ends: A = tridiag(-1, 2, -1)/h^2, h = L/(d+1), one scalar
// actuator per interior node.
inline LtiSystem make_heat(Index d, double length) {
    require(d >= 1, "make_heat: need at least one interior node");
    require(length > 0.0, "make_heat: domain length must be positive");
    const double h = length / static_cast<double>(d + 1);
    const double s = 1.0 / (h * h);
    LtiSystem sys;
    sys.a = Matrix::Zero(d, d);
    for (Index j = 0; j < d; ++j) {
        sys.a(j, j) = 2.0 * s;
        if (j + 1 < d) {
            sys.a(j, j + 1) = -s;
            sys.a(j + 1, j) = -s;
        }
    }
    sys.blocks.reserve(static_cast<size_t>(d));
    for (Index j = 0; j < d; ++j) sys.blocks.push_back(Matrix::Identity(d, d).col(j));
    sys.label = "heat d=" + std::to_string(d) + " L=" + std::to_string(length);
    sys.structure = Structure::self_adjoint;
    validate(sys);
    return sys;
}

// First-order form of the semidiscrete 1-d wave equation on state (y, y'):
// A = [[0, -I], [Lap, 0]] with the discrete Dirichlet Laplacian, velocity
// actuators at every interior node. Purely imaginary spectrum, so the
// forbidden set is genuinely nontrivial.
inline LtiSystem make_wave(Index d, double length) {
    require(d >= 1, "make_wave: need at least one interior node");
    require(length > 0.0, "make_wave: domain length must be positive");
    const double h = length / static_cast<double>(d + 1);
    const double s = 1.0 / (h * h);
    Matrix lap = Matrix::Zero(d, d);
    for (Index j = 0; j < d; ++j) {
        lap(j, j) = 2.0 * s;
        if (j + 1 < d) {
            lap(j, j + 1) = -s;
            lap(j + 1, j) = -s;
        }
    }
    LtiSystem sys;
    sys.a = Matrix::Zero(2 * d, 2 * d);
    sys.a.topRightCorner(d, d) = -Matrix::Identity(d, d);
    sys.a.bottomLeftCorner(d, d) = lap;
    sys.blocks.reserve(static_cast<size_t>(d));
    for (Index j = 0; j < d; ++j) sys.blocks.push_back(Matrix::Identity(2 * d, 2 * d).col(d + j));
    sys.label = "wave d=" + std::to_string(d) + " L=" + std::to_string(length);
    sys.structure = Structure::general;
    validate(sys);
    return sys;
}

// Galerkin truncation of a two-component parabolic system on (0, pi) with
// constant coupling P and the actuators acting on one component each over
// the whole domain: per sine mode j the block is j^2 diag(d1, d2) + P.
inline LtiSystem make_coupled_parabolic(Index modes, double d1, double d2, const Matrix& p) {
    require(modes >= 1, "make_coupled_parabolic: need at least one mode");
    require(d1 > 0.0 && d2 > 0.0, "make_coupled_parabolic: diffusivities must be positive");
    require(p.rows() == 2 && p.cols() == 2, "make_coupled_parabolic: P must be 2x2");
    require((p - p.transpose()).norm() <= 1e-12 * std::max(p.norm(), 1.0),
            "make_coupled_parabolic: P must be symmetric");
    {
        Eigen::SelfAdjointEigenSolver<Matrix> es(p, Eigen::EigenvaluesOnly);
        require(es.eigenvalues().minCoeff() > 0.0, "make_coupled_parabolic: P must be positive definite");
    }
    const Index d = 2 * modes;
    LtiSystem sys;
    sys.a = Matrix::Zero(d, d);
    for (Index j = 1; j <= modes; ++j) {
        Matrix block = p;
        block(0, 0) += static_cast<double>(j * j) * d1;
        block(1, 1) += static_cast<double>(j * j) * d2;
        sys.a.block(2 * (j - 1), 2 * (j - 1), 2, 2) = block;
    }
    Matrix b1 = Matrix::Zero(d, modes);
    Matrix b2 = Matrix::Zero(d, modes);
    for (Index j = 0; j < modes; ++j) {
        b1(2 * j, j) = 1.0;
        b2(2 * j + 1, j) = 1.0;
    }
    sys.blocks = {b1, b2};
    sys.label = "coupled parabolic modes=" + std::to_string(modes);
    sys.structure = Structure::self_adjoint;
    validate(sys);
    return sys;
}

// Seeded dense instance, resampled until the Kalman condition holds
// (controllability is generic, so the first draw almost always passes).
inline LtiSystem make_random_controllable(Index d, Index n, const std::vector<Index>& block_dims,
                                          std::uint64_t seed) {
    require(d >= 1, "make_random_controllable: state dimension must be positive");
    require(n >= 1 && static_cast<Index>(block_dims.size()) == n,
            "make_random_controllable: one block width per control");
    Rng rng(seed);
    for (int attempt = 0; attempt < 100; ++attempt) {
        LtiSystem sys;
        sys.a = rng.uniform_matrix(d, d);
        sys.blocks.clear();
        for (Index i = 0; i < n; ++i) {
            require(block_dims[static_cast<size_t>(i)] >= 1, "make_random_controllable: block width must be positive");
            sys.blocks.push_back(rng.uniform_matrix(d, block_dims[static_cast<size_t>(i)]));
        }
        sys.label = "random d=" + std::to_string(d) + " seed=" + std::to_string(seed);
        sys.structure = Structure::general;
        if (kalman_check(sys).controllable) {
            validate(sys);
            return sys;
        }
    }
    throw std::runtime_error("make_random_controllable: resample cap exceeded");
}

}  // namespace switchctl
