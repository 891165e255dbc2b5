#include "switchctl/pipeline.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "switchctl/models.hpp"

using namespace switchctl;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("switchctl_pipe_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string dir(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

RunConfig heat_config(Index d, std::uint64_t seed, Index n = 600) {
    RunConfig cfg;
    cfg.sys = make_heat(d, 1.0);
    cfg.horizon = 1.0;
    cfg.grid_n = n;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST(Pipeline, HeatEndToEnd) {
    const RunReport rep = synthesize_run(heat_config(2, 3, 2000));
    EXPECT_EQ(rep.status, RunStatus::ok);
    EXPECT_TRUE(rep.converged);
    EXPECT_LE(rep.el_residual, 1e-6);
    EXPECT_TRUE(rep.switching_valid);
    EXPECT_LE(rep.terminal_norm, 1e-6 * rep.y0_norm);
    EXPECT_LE(rep.tie_fraction, 5.0 / 2001.0);
    EXPECT_LE(rep.duality_residual, 1e-7 * (rep.y0_norm + std::sqrt(rep.control_cost)));
    ASSERT_EQ(rep.base_w.values.size(), 1u);  // symmetric A: W = {0}
    EXPECT_EQ(rep.base_w.values[0], 0.0);
    ASSERT_EQ(rep.omegas.size(), 2u);
    EXPECT_DOUBLE_EQ(rep.omegas[1], 0.5);
}

TEST(Pipeline, TerminalNormBoundedByCertificates) {
    const RunReport rep = synthesize_run(heat_config(2, 4, 1000));
    ASSERT_TRUE(rep.converged);
    // |y(T)| <= sqrt(d) * raw Euler-Lagrange residual + duality mismatch margin
    const double den = rep.y0_norm + rep.j_value * 2.0 + 1.0;  // coarse but explicit
    const double bound = std::sqrt(2.0) * rep.el_residual * den + 10.0 * rep.duality_residual + 1e-12;
    EXPECT_LE(rep.terminal_norm, bound);
}

TEST(Pipeline, ZeroInitialState) {
    RunConfig cfg = heat_config(3, 5, 200);
    cfg.y0 = Vector::Zero(3);
    const RunReport rep = synthesize_run(cfg);
    EXPECT_EQ(rep.status, RunStatus::ok);
    EXPECT_EQ(rep.j_value, 0.0);
    EXPECT_EQ(rep.terminal_norm, 0.0);
    for (Index i = 0; i < rep.controls.channels(); ++i)
        for (Index k = 0; k < rep.controls.nodes(); ++k)
            EXPECT_EQ(rep.controls.controls[static_cast<size_t>(i)][static_cast<size_t>(k)].norm(), 0.0);
}

TEST(Pipeline, UncontrollableSystemReported) {
    RunConfig cfg;
    cfg.sys.a = Matrix::Zero(2, 2);
    cfg.sys.a(0, 0) = 1.0;
    cfg.sys.a(1, 1) = 2.0;
    Matrix b(2, 1);
    b << 1, 0;
    cfg.sys.blocks = {b};
    cfg.sys.label = "decoupled";
    cfg.grid_n = 100;
    const RunReport rep = synthesize_run(cfg);
    EXPECT_EQ(rep.status, RunStatus::not_controllable);
    EXPECT_EQ(rep.kalman_rank, 1);
}

TEST(Pipeline, EmitsDeterministicArtifacts) {
    TempDir tmp;
    RunConfig cfg = heat_config(2, 11, 400);
    cfg.out_dir = tmp.dir("run_a");
    const RunReport rep_a = synthesize_run(cfg);
    cfg.out_dir = tmp.dir("run_b");
    const RunReport rep_b = synthesize_run(cfg);
    ASSERT_EQ(rep_a.status, RunStatus::ok);
    ASSERT_EQ(rep_b.status, RunStatus::ok);
    for (const char* name : {"/controls.csv", "/trajectory.csv", "/adjoint.csv", "/report.txt"}) {
        const std::string a = slurp(tmp.dir("run_a") + name);
        const std::string b = slurp(tmp.dir("run_b") + name);
        ASSERT_FALSE(a.empty());
        EXPECT_EQ(a, b) << name;
    }
}

TEST(Pipeline, ReportNumbersAppearBitIdentically) {
    TempDir tmp;
    RunConfig cfg = heat_config(2, 12, 400);
    cfg.out_dir = tmp.dir("run");
    const RunReport rep = synthesize_run(cfg);
    const std::string report = slurp(tmp.dir("run") + "/report.txt");
    EXPECT_NE(report.find("J_value = " + format_double(rep.j_value)), std::string::npos);
    EXPECT_NE(report.find("terminal_norm = " + format_double(rep.terminal_norm)), std::string::npos);
    EXPECT_NE(report.find("el_residual = " + format_double(rep.el_residual)), std::string::npos);
    EXPECT_NE(report.find("control_cost = " + format_double(rep.control_cost)), std::string::npos);
}

TEST(Pipeline, CheckRoundTripReproducesTerminalNorm) {
    TempDir tmp;
    RunConfig cfg = heat_config(2, 13, 400);
    cfg.out_dir = tmp.dir("run");
    const RunReport rep = synthesize_run(cfg);
    ASSERT_EQ(rep.status, RunStatus::ok);
    const CheckReport check = check_run(cfg.sys, cfg.horizon, cfg.grid_n, rep.y0,
                                        tmp.dir("run") + "/controls.csv");
    EXPECT_TRUE(check.switching_valid);
    EXPECT_NEAR(check.terminal_norm, rep.terminal_norm, 1e-12 * std::max(1.0, rep.terminal_norm));
    EXPECT_EQ(check.switch_count, rep.switch_count);
}

TEST(Pipeline, CheckDetectsTamperedControls) {
    TempDir tmp;
    RunConfig cfg = heat_config(2, 14, 200);
    cfg.out_dir = tmp.dir("run");
    const RunReport rep = synthesize_run(cfg);
    ASSERT_EQ(rep.status, RunStatus::ok);
    // hand-edit one row so two blocks are active at once
    const std::string path = tmp.dir("run") + "/controls.csv";
    std::ifstream in(path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    in.close();
    ASSERT_GT(lines.size(), 3u);
    {
        const std::string t_cell = lines[2].substr(0, lines[2].find(','));
        lines[2] = t_cell + ",1,0.5,0.5";  // both blocks nonzero at one sample
    }
    std::ofstream out(path);
    for (const auto& line : lines) out << line << "\n";
    out.close();
    const CheckReport check = check_run(cfg.sys, cfg.horizon, cfg.grid_n, rep.y0, path);
    EXPECT_FALSE(check.switching_valid);
}

TEST(Pipeline, ZeroControlFileGivesFreeFlow) {
    TempDir tmp;
    const LtiSystem sys = make_heat(2, 1.0);
    const TimeGrid grid(1.0, 200);
    HalfGridControls hg;
    hg.u.resize(2);
    hg.active.assign(static_cast<size_t>(2 * grid.steps + 1), 0);
    for (Index i = 0; i < 2; ++i)
        hg.u[static_cast<size_t>(i)].assign(static_cast<size_t>(2 * grid.steps + 1), Vector::Zero(1));
    const std::string path = tmp.dir("zero.csv");
    write_controls_csv(path, sys, grid, hg);
    Vector y0(2);
    y0 << 1.0, -0.5;
    const CheckReport check = check_run(sys, 1.0, grid.steps, y0, path);
    const double expect = (expm(Matrix(-1.0 * sys.a)) * y0).norm();
    EXPECT_NEAR(check.terminal_norm, expect, 1e-10 * expect);
    EXPECT_TRUE(check.switching_valid);
}

TEST(Pipeline, RandomControllableEndToEnd) {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        RunConfig cfg;
        cfg.sys = make_random_controllable(4, 2, {1, 1}, seed);
        cfg.horizon = 1.0;
        cfg.grid_n = 2000;
        cfg.seed = seed;
        cfg.refine_crossings = true;
        const RunReport rep = synthesize_run(cfg);
        EXPECT_TRUE(rep.switching_valid);
        worst = std::max(worst, rep.terminal_norm_rel);
    }
    EXPECT_LE(worst, 1e-5);
}

TEST(Pipeline, RefineCrossingsReportsSwitchTimes) {
    RunConfig cfg;
    cfg.sys = make_wave(2, 1.0);
    cfg.horizon = 2.0;
    cfg.grid_n = 800;
    cfg.seed = 15;
    cfg.refine_crossings = true;
    const RunReport rep = synthesize_run(cfg);
    EXPECT_EQ(static_cast<Index>(rep.crossings.size()), rep.switch_count);
}
