#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "switchctl/io.hpp"
#include "switchctl/minimize.hpp"
#include "switchctl/models.hpp"
#include "switchctl/refine.hpp"
#include "switchctl/simulate.hpp"

namespace switchctl {

enum class RunStatus : int { ok = 0, not_controllable = 2, not_converged = 3, input_error = 4 };

struct RunConfig {
    LtiSystem sys;
    double horizon = 1.0;
    Index grid_n = 2000;
    Variant variant = Variant::exact;
    double epsilon = 1e-2;             // approximate variant
    std::vector<Vector> source_nodes;  // source variant, one sample per node
    double margin = 0.5;
    double tol = 1e-6;
    double tie_tol = 1e-9;
    double sim_check_tol = 1e-4;  // relative terminal norm accepted as success
    Index max_iter = 2000;
    std::uint64_t seed = 1;
    Vector y0;  // empty: seeded random unit vector
    Index duality_probes = 20;
    bool refine_crossings = false;
    std::string out_dir;  // empty: no files written
};

struct RunReport {
    RunStatus status = RunStatus::ok;
    std::string label;
    Index dim = 0;
    Index channels = 0;
    Index kalman_rank = 0;
    bool controllable = false;
    std::vector<double> omegas;
    ForbiddenSet base_w;
    std::vector<ForbiddenSet> ladder;
    bool converged = false;
    double j_value = 0.0;
    double el_residual = 0.0;
    Index iterations = 0;
    double terminal_norm = 0.0;
    double terminal_norm_rel = 0.0;
    double y0_norm = 0.0;
    double tie_fraction = 0.0;
    Index switch_count = 0;
    double control_cost = 0.0;
    double duality_residual = 0.0;
    bool switching_valid = false;
    std::vector<double> crossings;  // refined switch times (optional pass)

    // artifacts retained for in-process callers (tests, sweeps)
    Vector z_terminal;
    Vector y0;
    MinimizationResult minimization;
    SwitchingControlSet controls;
    Trajectory trajectory;
};

namespace detail {

inline std::string join_doubles(const std::vector<double>& vals) {
    std::string s;
    for (size_t i = 0; i < vals.size(); ++i) {
        if (i) s += " ";
        s += format_double(vals[static_cast<size_t>(i)]);
    }
    return s;
}

}  // namespace detail

inline void write_report_file(const std::string& path, const RunConfig& cfg, const RunReport& rep) {
    std::ofstream out(path);
    require(out.good(), "write_report_file: cannot open " + path);
    // flat key=value lines, fixed order, no volatile fields
    out << "label = " << rep.label << "\n";
    out << "dim = " << rep.dim << "\n";
    out << "channels = " << rep.channels << "\n";
    out << "horizon = " << format_double(cfg.horizon) << "\n";
    out << "grid_n = " << cfg.grid_n << "\n";
    out << "variant = "
        << (cfg.variant == Variant::exact ? "exact"
                                          : (cfg.variant == Variant::approximate ? "approximate" : "source"))
        << "\n";
    out << "epsilon = " << format_double(cfg.variant == Variant::approximate ? cfg.epsilon : 0.0) << "\n";
    out << "margin = " << format_double(cfg.margin) << "\n";
    out << "tol = " << format_double(cfg.tol) << "\n";
    out << "tie_tol = " << format_double(cfg.tie_tol) << "\n";
    out << "sim_check_tol = " << format_double(cfg.sim_check_tol) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "status = " << static_cast<int>(rep.status) << "\n";
    out << "kalman_rank = " << rep.kalman_rank << "\n";
    out << "controllable = " << (rep.controllable ? 1 : 0) << "\n";
    out << "omegas = " << detail::join_doubles(rep.omegas) << "\n";
    out << "W = " << detail::join_doubles(rep.base_w.values) << "\n";
    for (size_t m = 0; m < rep.ladder.size(); ++m)
        out << "W_" << (m + 2) << " = " << detail::join_doubles(rep.ladder[m].values) << "\n";
    out << "converged = " << (rep.converged ? 1 : 0) << "\n";
    out << "J_value = " << format_double(rep.j_value) << "\n";
    out << "el_residual = " << format_double(rep.el_residual) << "\n";
    out << "iterations = " << rep.iterations << "\n";
    out << "y0_norm = " << format_double(rep.y0_norm) << "\n";
    out << "terminal_norm = " << format_double(rep.terminal_norm) << "\n";
    out << "terminal_norm_rel = " << format_double(rep.terminal_norm_rel) << "\n";
    out << "tie_fraction = " << format_double(rep.tie_fraction) << "\n";
    out << "switch_count = " << rep.switch_count << "\n";
    out << "control_cost = " << format_double(rep.control_cost) << "\n";
    out << "duality_residual = " << format_double(rep.duality_residual) << "\n";
    out << "switching_valid = " << (rep.switching_valid ? 1 : 0) << "\n";
    if (!rep.crossings.empty()) out << "crossings = " << detail::join_doubles(rep.crossings) << "\n";
}

// Full synthesis: frequency plan, dual minimization, classification, control
// extraction, forward verification, duality certificate, artifact emission.
inline RunReport synthesize_run(const RunConfig& cfg) {
    validate(cfg.sys);
    require(cfg.tol > 0.0 && cfg.tie_tol > 0.0 && cfg.sim_check_tol > 0.0,
            "synthesize_run: tolerances must be positive");
    require(cfg.grid_n >= 2, "synthesize_run: grid_n must be at least 2");
    require(cfg.horizon > 0.0, "synthesize_run: horizon must be positive");

    RunReport rep;
    rep.label = cfg.sys.label;
    rep.dim = cfg.sys.dim();
    rep.channels = cfg.sys.num_blocks();

    const KalmanResult kal = kalman_check(cfg.sys);
    rep.kalman_rank = kal.rank;
    rep.controllable = kal.controllable;
    if (!kal.controllable) {
        rep.status = RunStatus::not_controllable;
        if (!cfg.out_dir.empty()) {
            std::filesystem::create_directories(cfg.out_dir);
            write_report_file(cfg.out_dir + "/report.txt", cfg, rep);
        }
        return rep;
    }

    const TimeGrid grid(cfg.horizon, cfg.grid_n);
    const FrequencyPlan plan = plan_frequencies(cfg.sys, cfg.sys.num_blocks(), cfg.margin);
    const WeightFamily weights(plan);
    rep.omegas = plan.omegas;
    rep.ladder = plan.forbidden_sets;
    {
        const double scale = cfg.sys.a.norm();
        rep.base_w = forbidden_set_W(eigenvalues(Matrix(cfg.sys.a.transpose())), 1e-8 * (scale > 0 ? scale : 1.0));
    }

    Vector y0 = cfg.y0;
    if (y0.size() == 0) y0 = Rng(cfg.seed).unit_vector(cfg.sys.dim());
    require(y0.size() == cfg.sys.dim(), "synthesize_run: y0 dimension mismatch");
    rep.y0 = y0;
    rep.y0_norm = y0.norm();

    std::vector<Vector> source = cfg.source_nodes;
    if (cfg.variant == Variant::source)
        require(static_cast<Index>(source.size()) == grid.nodes(),
                "synthesize_run: source samples must match the grid");
    else
        source.clear();

    Objective obj = make_objective(cfg.sys, grid, weights, y0, cfg.variant,
                                   cfg.variant == Variant::approximate ? cfg.epsilon : 0.0, source);
    MinimizeOptions mopts;
    mopts.tol = cfg.tol;
    mopts.max_iter = cfg.max_iter;
    mopts.tie_tol = cfg.tie_tol;
    rep.minimization = minimize(obj, mopts);
    rep.converged = rep.minimization.converged;
    rep.j_value = rep.minimization.j_value;
    rep.el_residual = rep.minimization.el_residual;
    rep.iterations = rep.minimization.iterations;
    rep.z_terminal = rep.minimization.z_terminal;

    // optional crossing refinement: re-solve the optimality system under the
    // crossing-resolved quadrature (the node-aligned tie break caps the
    // reachable terminal norm at O(h) per tied node otherwise)
    if (cfg.refine_crossings && cfg.variant != Variant::approximate &&
        rep.z_terminal.norm() > 0.0) {
        rep.z_terminal = resolve_crossings_polish(obj, rep.z_terminal, cfg.tie_tol);
        rep.el_residual = el_residual(obj, rep.z_terminal);
        rep.j_value = eval_J(obj, rep.z_terminal);
        rep.converged = rep.el_residual <= cfg.tol;
    }

    const AdjointTrace trace = propagate_adjoint(cfg.sys, obj.stack, rep.z_terminal);
    const ActivePartition part = classify(trace, weights, grid, cfg.tie_tol);
    rep.controls = extract_controls(part, trace, weights, grid);
    rep.tie_fraction = part.tie_fraction;
    rep.switch_count = rep.controls.switch_count;
    rep.switching_valid = validate_switching(rep.controls);

    if (cfg.refine_crossings) {
        const ResolvedQuadrature quad = build_resolved_quadrature(cfg.sys, grid, trace, weights, part);
        rep.crossings = quad.crossings;
        rep.trajectory = integrate_forward_resolved(cfg.sys, grid, rep.controls, trace, weights,
                                                    quad.crossings, y0, source);
        rep.duality_residual =
            duality_check_resolved(cfg.sys, grid, trace, weights, quad, y0, rep.trajectory,
                                   cfg.duality_probes, cfg.seed ^ 0x9e3779b97f4a7c15ULL, source);
    } else {
        const HalfGridControls hg = sample_controls_halfgrid(cfg.sys, grid, rep.controls, trace, weights);
        rep.trajectory = integrate_forward(cfg.sys, grid, rep.controls, hg, y0, source);
        rep.duality_residual = duality_check(cfg.sys, grid, rep.controls, y0, rep.trajectory,
                                             cfg.duality_probes, cfg.seed ^ 0x9e3779b97f4a7c15ULL, source);
    }
    rep.terminal_norm = rep.trajectory.terminal_norm;
    rep.terminal_norm_rel = rep.y0_norm > 0.0 ? rep.terminal_norm / rep.y0_norm : 0.0;
    rep.control_cost = rep.trajectory.control_cost;

    const bool terminal_ok = rep.terminal_norm <= cfg.sim_check_tol * std::max(rep.y0_norm, 1e-300) ||
                             (rep.y0_norm == 0.0 && rep.terminal_norm == 0.0) ||
                             cfg.variant != Variant::exact;
    rep.status = (rep.converged && terminal_ok) ? RunStatus::ok : RunStatus::not_converged;

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        const HalfGridControls emitted = sample_controls_halfgrid(cfg.sys, grid, rep.controls, trace, weights);
        write_controls_csv(cfg.out_dir + "/controls.csv", cfg.sys, grid, emitted);
        write_trajectory_csv(cfg.out_dir + "/trajectory.csv", grid, rep.trajectory);
        write_adjoint_csv(cfg.out_dir + "/adjoint.csv", cfg.sys, grid, trace);
        write_report_file(cfg.out_dir + "/report.txt", cfg, rep);
    }
    return rep;
}

struct CheckReport {
    double terminal_norm = 0.0;
    double terminal_norm_rel = 0.0;
    bool switching_valid = false;
    Index switch_count = 0;
};

// Re-simulate externally supplied controls and validate the switching
// condition; lets third parties verify emitted artifacts independently.
inline CheckReport check_run(const LtiSystem& sys, double horizon, Index grid_n, const Vector& y0,
                             const std::string& controls_path,
                             const std::vector<Vector>& source = {}) {
    validate(sys);
    const TimeGrid grid(horizon, grid_n);
    const ParsedControls parsed = read_controls_csv(controls_path, sys, grid);
    CheckReport rep;
    rep.switch_count = parsed.node_controls.switch_count;
    {
        bool valid = validate_switching(parsed.node_controls);
        if (valid && parsed.has_half_grid) {
            // midpoint rows must satisfy the same at-most-one-block rule
            for (Index j = 0; j < parsed.half_grid.samples() && valid; ++j) {
                int nonzero = 0;
                for (Index i = 0; i < parsed.half_grid.channels(); ++i)
                    if (parsed.half_grid.u[static_cast<size_t>(i)][static_cast<size_t>(j)].norm() > 0.0) ++nonzero;
                valid = nonzero <= 1;
            }
        }
        rep.switching_valid = valid;
    }
    const Trajectory traj =
        parsed.has_half_grid
            ? integrate_forward(sys, grid, parsed.node_controls, parsed.half_grid, y0, source)
            : integrate_forward(sys, grid, parsed.node_controls, y0, source);
    rep.terminal_norm = traj.terminal_norm;
    rep.terminal_norm_rel = y0.norm() > 0.0 ? traj.terminal_norm / y0.norm() : 0.0;
    return rep;
}

}  // namespace switchctl
