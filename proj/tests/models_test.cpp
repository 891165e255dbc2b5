#include "switchctl/models.hpp"

#include <gtest/gtest.h>

#include "switchctl/frequencies.hpp"

using namespace switchctl;

namespace {

constexpr double kPi = 3.14159265358979323846;

// closed-form Dirichlet Laplacian eigenvalues (4/h^2) sin^2(j pi / (2(d+1)))
std::vector<double> heat_eigs_closed_form(Index d, double length) {
    const double h = length / static_cast<double>(d + 1);
    std::vector<double> eigs;
    for (Index j = 1; j <= d; ++j) {
        const double s = std::sin(static_cast<double>(j) * kPi / (2.0 * static_cast<double>(d + 1)));
        eigs.push_back(4.0 / (h * h) * s * s);
    }
    std::sort(eigs.begin(), eigs.end());
    return eigs;
}

}  // namespace

TEST(MakeHeat, SingleInteriorNode) {
    const LtiSystem sys = make_heat(1, 2.0);  // h = 1, stencil (-1, 2, -1)
    ASSERT_EQ(sys.dim(), 1);
    EXPECT_DOUBLE_EQ(sys.a(0, 0), 2.0);
    EXPECT_EQ(sys.num_blocks(), 1);
}

TEST(MakeHeat, ClosedFormSpectrum) {
    const LtiSystem sys = make_heat(3, 4.0);  // h = 1
    const std::vector<double> expect = heat_eigs_closed_form(3, 4.0);
    // also the explicit values 2 - sqrt(2), 2, 2 + sqrt(2)
    EXPECT_NEAR(expect[0], 2.0 - std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(expect[1], 2.0, 1e-12);
    EXPECT_NEAR(expect[2], 2.0 + std::sqrt(2.0), 1e-12);
    const Spectrum spec = eigenvalues(sys.a);
    ASSERT_EQ(spec.values.size(), 3u);
    for (size_t j = 0; j < 3; ++j) {
        EXPECT_NEAR(spec.values[j].real(), expect[j], 1e-10);
        EXPECT_NEAR(spec.values[j].imag(), 0.0, 1e-12);
    }
}

TEST(MakeHeat, SymmetricPositiveDefiniteAndControllable) {
    for (Index d : {2, 5, 10}) {
        const LtiSystem sys = make_heat(d, 1.0);
        EXPECT_EQ(sys.structure, Structure::self_adjoint);
        EXPECT_EQ((sys.a - sys.a.transpose()).norm(), 0.0);
        Eigen::SelfAdjointEigenSolver<Matrix> es(sys.a, Eigen::EigenvaluesOnly);
        EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
        EXPECT_TRUE(kalman_check(sys).controllable);
    }
}

TEST(MakeWave, SpectrumPurelyImaginary) {
    const LtiSystem sys = make_wave(1, 2.0);  // h = 1, Lap = [2]
    ASSERT_EQ(sys.dim(), 2);
    const Spectrum spec = eigenvalues(sys.a);
    ASSERT_EQ(spec.values.size(), 2u);
    EXPECT_NEAR(spec.values[0].imag(), -std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(spec.values[1].imag(), std::sqrt(2.0), 1e-12);
    for (const Complex& v : spec.values) EXPECT_LE(std::abs(v.real()), 1e-10 * sys.a.norm());
}

TEST(MakeWave, ForbiddenSetHandEnumeration) {
    // eigenvalues +-i sqrt(2): gaps +-2 sqrt(2), halves +-sqrt(2), plus 0
    const LtiSystem sys = make_wave(1, 2.0);
    const ForbiddenSet w = forbidden_set_W(eigenvalues(sys.a), 1e-8 * sys.a.norm());
    const double r2 = std::sqrt(2.0);
    ASSERT_EQ(w.values.size(), 5u);
    const double expect[5] = {-2.0 * r2, -r2, 0.0, r2, 2.0 * r2};
    for (size_t i = 0; i < 5; ++i) EXPECT_NEAR(w.values[i], expect[i], 1e-9);
}

TEST(MakeWave, SpectrumClosedUnderConjugationAndNegation) {
    for (Index d : {1, 2, 3, 5}) {
        const LtiSystem sys = make_wave(d, 1.0);
        const Spectrum spec = eigenvalues(sys.a);
        for (const Complex& v : spec.values) {
            EXPECT_LE(std::abs(v.real()), 1e-10 * sys.a.norm());
            bool has_conj = false;
            for (const Complex& w : spec.values)
                if (std::abs(w - std::conj(v)) <= 1e-8 * sys.a.norm()) has_conj = true;
            EXPECT_TRUE(has_conj);
        }
    }
}

TEST(MakeWave, ControllableUpToEight) {
    for (Index d = 1; d <= 8; ++d) {
        const LtiSystem sys = make_wave(d, 1.0);
        const KalmanResult res = kalman_check(sys);
        EXPECT_TRUE(res.controllable) << "wave d=" << d;
        EXPECT_EQ(res.rank, 2 * d);
    }
}

TEST(MakeCoupledParabolic, SingleModeIdentityCoupling) {
    const LtiSystem sys = make_coupled_parabolic(1, 1.0, 1.0, Matrix(Matrix::Identity(2, 2)));
    ASSERT_EQ(sys.dim(), 2);
    EXPECT_LT((sys.a - 2.0 * Matrix::Identity(2, 2)).norm(), 1e-14);
}

TEST(MakeCoupledParabolic, TwoModeBlocksAndSpectrum) {
    Matrix p(2, 2);
    p << 2.0, 1.0, 1.0, 2.0;
    const LtiSystem sys = make_coupled_parabolic(2, 1.0, 2.0, p);
    ASSERT_EQ(sys.dim(), 4);
    Matrix b1(2, 2), b2(2, 2);
    b1 << 3.0, 1.0, 1.0, 4.0;   // diag(1,2) + P
    b2 << 6.0, 1.0, 1.0, 10.0;  // 4 diag(1,2) + P
    EXPECT_LT((sys.a.block(0, 0, 2, 2) - b1).norm(), 1e-14);
    EXPECT_LT((sys.a.block(2, 2, 2, 2) - b2).norm(), 1e-14);
    // direct eigensolve oracle: blocks are decoupled 2x2 symmetric
    std::vector<double> expect;
    for (const Matrix& b : {b1, b2}) {
        const double tr = b.trace(), det = b.determinant();
        const double disc = std::sqrt(tr * tr / 4.0 - det);
        expect.push_back(tr / 2.0 - disc);
        expect.push_back(tr / 2.0 + disc);
    }
    std::sort(expect.begin(), expect.end());
    const Spectrum spec = eigenvalues(sys.a);
    ASSERT_EQ(spec.values.size(), 4u);
    for (size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(spec.values[i].real(), expect[i], 1e-10);
        EXPECT_NEAR(spec.values[i].imag(), 0.0, 1e-12);
    }
    // real spectrum: W = {0}
    const ForbiddenSet w = forbidden_set_W(spec, 1e-8 * sys.a.norm());
    ASSERT_EQ(w.values.size(), 1u);
    EXPECT_EQ(w.values[0], 0.0);
}

TEST(MakeCoupledParabolic, ActuatorsSelectComponents) {
    Matrix p(2, 2);
    p << 2.0, 1.0, 1.0, 2.0;
    const LtiSystem sys = make_coupled_parabolic(3, 1.0, 2.0, p);
    ASSERT_EQ(sys.num_blocks(), 2);
    EXPECT_EQ(sys.block_dim(0), 3);
    EXPECT_EQ(sys.block_dim(1), 3);
    for (Index j = 0; j < 3; ++j) {
        EXPECT_EQ(sys.blocks[0](2 * j, j), 1.0);
        EXPECT_EQ(sys.blocks[1](2 * j + 1, j), 1.0);
    }
    EXPECT_TRUE(kalman_check(sys).controllable);
}

TEST(MakeCoupledParabolic, RejectsNonPositiveDefiniteCoupling) {
    EXPECT_THROW(make_coupled_parabolic(1, 1.0, 1.0, Matrix(Matrix::Zero(2, 2))), std::invalid_argument);
    Matrix asym(2, 2);
    asym << 1.0, 0.5, 0.2, 1.0;
    EXPECT_THROW(make_coupled_parabolic(1, 1.0, 1.0, asym), std::invalid_argument);
}

TEST(MakeRandomControllable, DeterministicForFixedSeed) {
    const LtiSystem a = make_random_controllable(4, 2, {1, 1}, 7777);
    const LtiSystem b = make_random_controllable(4, 2, {1, 1}, 7777);
    EXPECT_EQ((a.a - b.a).norm(), 0.0);
    for (size_t i = 0; i < a.blocks.size(); ++i) EXPECT_EQ((a.blocks[i] - b.blocks[i]).norm(), 0.0);
    const LtiSystem c = make_random_controllable(4, 2, {1, 1}, 7778);
    EXPECT_GT((a.a - c.a).norm(), 0.0);
}

TEST(MakeRandomControllable, PassesKalmanByConstruction) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const LtiSystem sys = make_random_controllable(5, 3, {1, 2, 1}, seed);
        EXPECT_TRUE(kalman_check(sys).controllable);
        EXPECT_EQ(sys.block_dim(1), 2);
    }
}
