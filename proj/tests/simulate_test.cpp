#include "switchctl/simulate.hpp"

#include <gtest/gtest.h>

#include "switchctl/models.hpp"
#include "switchctl/rng.hpp"

using namespace switchctl;

namespace {

SwitchingControlSet zero_controls(const LtiSystem& sys, const TimeGrid& grid) {
    SwitchingControlSet cs;
    cs.active.assign(static_cast<size_t>(grid.nodes()), 0);
    cs.controls.resize(static_cast<size_t>(sys.num_blocks()));
    for (Index i = 0; i < sys.num_blocks(); ++i)
        cs.controls[static_cast<size_t>(i)].assign(static_cast<size_t>(grid.nodes()),
                                                   Vector::Zero(sys.block_dim(i)));
    return cs;
}

// analytic single-channel control sampled on the half grid
HalfGridControls analytic_halfgrid(const LtiSystem& sys, const TimeGrid& grid,
                                   const std::function<Vector(double)>& u) {
    HalfGridControls hg;
    hg.u.resize(static_cast<size_t>(sys.num_blocks()));
    hg.active.assign(static_cast<size_t>(2 * grid.steps + 1), 0);
    for (Index i = 0; i < sys.num_blocks(); ++i)
        hg.u[static_cast<size_t>(i)].resize(static_cast<size_t>(2 * grid.steps + 1));
    const double half = grid.dt() / 2.0;
    for (Index j = 0; j <= 2 * grid.steps; ++j) {
        const double t = static_cast<double>(j) * half;
        hg.u[0][static_cast<size_t>(j)] = u(t);
        for (Index i = 1; i < sys.num_blocks(); ++i)
            hg.u[static_cast<size_t>(i)][static_cast<size_t>(j)] = Vector::Zero(sys.block_dim(i));
    }
    return hg;
}

SwitchingControlSet nodes_from_halfgrid(const LtiSystem& sys, const TimeGrid& grid,
                                        const HalfGridControls& hg) {
    SwitchingControlSet cs = zero_controls(sys, grid);
    for (Index k = 0; k <= grid.steps; ++k)
        for (Index i = 0; i < sys.num_blocks(); ++i)
            cs.controls[static_cast<size_t>(i)][static_cast<size_t>(k)] =
                hg.u[static_cast<size_t>(i)][static_cast<size_t>(2 * k)];
    return cs;
}

}  // namespace

TEST(IntegrateForward, HomogeneousFlow) {
    Rng rng(71);
    const LtiSystem sys = make_heat(4, 1.0);
    const TimeGrid grid(1.0, 200);
    const Vector y0 = rng.unit_vector(4);
    const Trajectory traj = integrate_forward(sys, grid, zero_controls(sys, grid), y0);
    const Vector expect = expm(Matrix(-1.0 * sys.a)) * y0;
    EXPECT_EQ((traj.y[0] - y0).norm(), 0.0);
    EXPECT_LT((traj.y.back() - expect).norm(), 1e-10 * expect.norm());
    EXPECT_EQ(traj.control_cost, 0.0);
}

TEST(IntegrateForward, PureIntegratorWithConstantControl) {
    LtiSystem sys;
    sys.a = Matrix::Zero(1, 1);
    sys.blocks = {Matrix::Identity(1, 1)};
    sys.label = "integrator";
    const TimeGrid grid(2.0, 100);
    const double c = 0.75;
    SwitchingControlSet cs = zero_controls(sys, grid);
    for (Index k = 0; k <= grid.steps; ++k) cs.controls[0][static_cast<size_t>(k)] = Vector::Constant(1, c);
    Vector y0(1);
    y0 << 0.4;
    const Trajectory traj = integrate_forward(sys, grid, cs, y0);
    EXPECT_NEAR(traj.y.back()[0], 0.4 + c * 2.0, 1e-10);
}

TEST(IntegrateForward, LinearInStateAndControl) {
    Rng rng(72);
    const LtiSystem sys = make_heat(3, 1.0);
    const TimeGrid grid(1.0, 100);
    const Vector y0a = rng.normal_vector(3), y0b = rng.normal_vector(3);
    SwitchingControlSet ca = zero_controls(sys, grid), cb = zero_controls(sys, grid), cab = zero_controls(sys, grid);
    for (Index k = 0; k <= grid.steps; ++k) {
        const double t = grid.node(k);
        ca.controls[0][static_cast<size_t>(k)] = Vector::Constant(1, std::sin(t));
        cb.controls[0][static_cast<size_t>(k)] = Vector::Constant(1, 0.3 * std::cos(2 * t));
        cab.controls[0][static_cast<size_t>(k)] =
            ca.controls[0][static_cast<size_t>(k)] + cb.controls[0][static_cast<size_t>(k)];
    }
    const Trajectory ta = integrate_forward(sys, grid, ca, y0a);
    const Trajectory tb = integrate_forward(sys, grid, cb, y0b);
    const Trajectory tab = integrate_forward(sys, grid, cab, Vector(y0a + y0b));
    for (Index k = 0; k <= grid.steps; ++k) {
        const Vector sum = ta.y[static_cast<size_t>(k)] + tb.y[static_cast<size_t>(k)];
        EXPECT_LT((tab.y[static_cast<size_t>(k)] - sum).norm(), 1e-12 * std::max(1.0, sum.norm()));
    }
}

TEST(IntegrateForward, FourthOrderOnSmoothControl) {
    // single actuator block, smooth analytic control, half-grid samples:
    // halving h should shrink the terminal error by about 16
    const LtiSystem sys = [] {
        LtiSystem s = make_heat(3, 1.0);
        s.blocks = {Matrix::Identity(3, 3)};  // one wide block
        return s;
    }();
    Vector y0(3);
    y0 << 1.0, -0.5, 0.25;
    Vector dir(3);
    dir << 0.3, 1.0, -0.7;
    auto u = [&](double t) { return Vector(std::sin(3.0 * t) * dir); };

    auto terminal = [&](Index n) {
        const TimeGrid grid(1.0, n);
        const HalfGridControls hg = analytic_halfgrid(sys, grid, u);
        const SwitchingControlSet cs = nodes_from_halfgrid(sys, grid, hg);
        return integrate_forward(sys, grid, cs, hg, y0).y.back();
    };
    const Vector ref = terminal(1024);
    const double e1 = (terminal(64) - ref).norm();
    const double e2 = (terminal(128) - ref).norm();
    EXPECT_GT(e1, 0.0);
    EXPECT_GE(e1 / e2, 8.0);  // empirical order >= 3
}

TEST(DualityCheck, HomogeneousTransposeIdentity) {
    Rng rng(73);
    const LtiSystem sys = make_heat(3, 1.0);
    const TimeGrid grid(1.0, 100);
    const Vector y0 = rng.unit_vector(3);
    const SwitchingControlSet cs = zero_controls(sys, grid);
    const Trajectory traj = integrate_forward(sys, grid, cs, y0);
    EXPECT_LE(duality_check(sys, grid, cs, y0, traj, 10, 99), 1e-12);
}

TEST(DualityCheck, ConstantControlFreeDynamics) {
    LtiSystem sys;
    sys.a = Matrix::Zero(2, 2);
    sys.blocks = {Matrix::Identity(2, 2).col(0), Matrix::Identity(2, 2).col(1)};
    sys.label = "free";
    const TimeGrid grid(1.0, 80);
    Vector y0(2);
    y0 << 1.0, -2.0;
    SwitchingControlSet cs = zero_controls(sys, grid);
    for (Index k = 0; k <= grid.steps; ++k) cs.controls[0][static_cast<size_t>(k)] = Vector::Constant(1, 0.6);
    const Trajectory traj = integrate_forward(sys, grid, cs, y0);
    // both sides equal <y0 + B u T, z>
    EXPECT_NEAR(traj.y.back()[0], 1.0 + 0.6, 1e-12);
    EXPECT_LE(duality_check(sys, grid, cs, y0, traj, 10, 100), 1e-10);
}

TEST(DualityCheck, IncludesSourceTerm) {
    Rng rng(74);
    const LtiSystem sys = make_heat(3, 1.0);
    const TimeGrid grid(1.0, 1000);
    const Vector y0 = rng.unit_vector(3);
    const Vector v = rng.normal_vector(3);
    std::vector<Vector> f(static_cast<size_t>(grid.nodes()));
    for (Index k = 0; k <= grid.steps; ++k)
        f[static_cast<size_t>(k)] = std::sin(3.14159265358979323846 * grid.node(k)) * v;
    const SwitchingControlSet cs = zero_controls(sys, grid);
    const Trajectory traj = integrate_forward(sys, grid, cs, y0, f);
    EXPECT_LE(duality_check(sys, grid, cs, y0, traj, 10, 101, f), 1e-9 * std::max(1.0, v.norm()));
}

TEST(HalfGrid, FallbackMatchesNodesAtEvenSamples) {
    Rng rng(75);
    const LtiSystem sys = make_heat(2, 1.0);
    const TimeGrid grid(1.0, 20);
    SwitchingControlSet cs = zero_controls(sys, grid);
    for (Index k = 0; k <= grid.steps; ++k)
        cs.controls[0][static_cast<size_t>(k)] = rng.normal_vector(1);
    const HalfGridControls hg = sample_controls_halfgrid(grid, cs);
    ASSERT_EQ(hg.samples(), 2 * grid.steps + 1);
    for (Index k = 0; k <= grid.steps; ++k)
        EXPECT_EQ((hg.u[0][static_cast<size_t>(2 * k)] - cs.controls[0][static_cast<size_t>(k)]).norm(), 0.0);
}
