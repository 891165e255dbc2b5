// Command line front end: builds a system (worked example or explicit file),
// runs the synthesis pipeline, and emits machine-readable artifacts.

#include <chrono>
#include <cstdlib>
#include <future>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "switchctl/switchctl.hpp"

namespace {

using namespace switchctl;

struct SystemArgs {
    std::string kind = "heat";  // heat | wave | coupled | random
    std::string file;           // explicit matrices, overrides kind
    long dim = 2;
    double length = 1.0;
    long modes = 2;
    double d1 = 1.0;
    double d2 = 1.0;
    std::vector<double> coupling = {2.0, 1.0, 1.0, 2.0};  // row-major 2x2 P
    long rand_n = 2;
    std::vector<long> rand_block_dims;
    std::uint64_t seed = 1;
};

LtiSystem build_system(const SystemArgs& args) {
    if (!args.file.empty()) return read_system_file(args.file);
    if (args.kind == "heat") return make_heat(args.dim, args.length);
    if (args.kind == "wave") return make_wave(args.dim, args.length);
    if (args.kind == "coupled") {
        Matrix p(2, 2);
        p << args.coupling[0], args.coupling[1], args.coupling[2], args.coupling[3];
        return make_coupled_parabolic(args.modes, args.d1, args.d2, p);
    }
    if (args.kind == "random") {
        std::vector<Index> widths(args.rand_block_dims.begin(), args.rand_block_dims.end());
        if (widths.empty()) widths.assign(static_cast<size_t>(args.rand_n), 1);
        return make_random_controllable(args.dim, static_cast<Index>(widths.size()), widths, args.seed);
    }
    throw std::invalid_argument("unknown system kind: " + args.kind);
}

void add_system_flags(CLI::App* cmd, SystemArgs& args) {
    cmd->add_option("--system", args.kind, "worked example kind: heat|wave|coupled|random");
    cmd->add_option("--system-file", args.file, "explicit matrices (see docs/formats.md)");
    cmd->add_option("--d", args.dim, "state/interior-node count for heat, wave, random");
    cmd->add_option("--L", args.length, "domain length for heat and wave");
    cmd->add_option("--modes", args.modes, "mode count for the coupled example");
    cmd->add_option("--d1", args.d1, "first diffusivity (coupled)");
    cmd->add_option("--d2", args.d2, "second diffusivity (coupled)");
    cmd->add_option("--P", args.coupling, "row-major 2x2 coupling matrix (coupled)")->expected(4);
    cmd->add_option("--blocks", args.rand_block_dims, "control block widths (random)");
}

struct RunFlags {
    double horizon = 1.0;
    long grid_n = 2000;
    std::string variant = "exact";
    double margin = 0.5;
    double tol = 1e-6;
    double tie_tol = 1e-9;
    double sim_tol = 1e-4;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    std::vector<double> y0_values;
    std::string y0_file;
    std::vector<std::uint64_t> seeds;  // optional sweep
    bool refine = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
    cmd->add_option("--T", flags.horizon, "control horizon");
    cmd->add_option("--grid-N", flags.grid_n, "number of grid subintervals (rounded up to even)");
    cmd->add_option("--variant", flags.variant, "exact, approx:EPS, or source:FILE");
    cmd->add_option("--margin", flags.margin, "frequency separation margin");
    cmd->add_option("--tol", flags.tol, "normalized optimality residual target");
    cmd->add_option("--tie-tol", flags.tie_tol, "relative gap treated as a tie");
    cmd->add_option("--sim-tol", flags.sim_tol, "relative terminal norm accepted as success");
    cmd->add_option("--seed", flags.seed, "seed for y0 draw and duality probes");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--y0", flags.y0_values, "explicit initial state (comma separated)")->delimiter(',');
    cmd->add_option("--y0-file", flags.y0_file, "initial state from file");
    cmd->add_option("--seeds", flags.seeds, "run one synthesis per seed (sweep)");
    cmd->add_flag("--refine-crossings", flags.refine, "bisection pass on switch instants");
}

RunConfig make_config(const SystemArgs& sys_args, const RunFlags& flags, std::uint64_t seed) {
    RunConfig cfg;
    cfg.sys = build_system(sys_args);
    cfg.horizon = flags.horizon;
    cfg.grid_n = flags.grid_n;
    cfg.margin = flags.margin;
    cfg.tol = flags.tol;
    cfg.tie_tol = flags.tie_tol;
    cfg.sim_check_tol = flags.sim_tol;
    cfg.seed = seed;
    cfg.refine_crossings = flags.refine;
    cfg.out_dir = flags.out_dir;

    if (!flags.y0_values.empty()) {
        cfg.y0 = Vector(static_cast<Index>(flags.y0_values.size()));
        for (size_t i = 0; i < flags.y0_values.size(); ++i) cfg.y0[static_cast<Index>(i)] = flags.y0_values[i];
    } else if (!flags.y0_file.empty()) {
        cfg.y0 = read_vector_file(flags.y0_file, cfg.sys.dim());
    }

    const TimeGrid grid(cfg.horizon, cfg.grid_n);
    if (flags.variant == "exact") {
        cfg.variant = Variant::exact;
    } else if (flags.variant.rfind("approx:", 0) == 0) {
        cfg.variant = Variant::approximate;
        cfg.epsilon = parse_double(flags.variant.substr(7));
    } else if (flags.variant.rfind("source:", 0) == 0) {
        cfg.variant = Variant::source;
        cfg.source_nodes = read_source_file(flags.variant.substr(7), cfg.sys.dim(), grid.nodes());
    } else {
        throw std::invalid_argument("bad --variant: " + flags.variant);
    }
    return cfg;
}

int run_synthesize(const SystemArgs& sys_args, const RunFlags& flags) {
    std::vector<std::uint64_t> seeds = flags.seeds;
    if (seeds.empty()) seeds.push_back(flags.seed);

    long max_threads = 1;
    if (const char* env = std::getenv("SWITCHCTL_THREADS")) {
        max_threads = std::max(1L, std::atol(env));
    }

    std::vector<RunReport> reports(seeds.size());
    std::vector<std::string> dirs(seeds.size());
    for (size_t i = 0; i < seeds.size(); ++i)
        dirs[i] = seeds.size() == 1 ? flags.out_dir : flags.out_dir + "/seed_" + std::to_string(seeds[i]);

    const auto t_start = std::chrono::steady_clock::now();
    size_t next = 0;
    while (next < seeds.size()) {
        const size_t batch = std::min(static_cast<size_t>(max_threads), seeds.size() - next);
        std::vector<std::future<RunReport>> futs;
        for (size_t b = 0; b < batch; ++b) {
            const size_t idx = next + b;
            futs.push_back(std::async(batch > 1 ? std::launch::async : std::launch::deferred, [&, idx] {
                RunConfig cfg = make_config(sys_args, flags, seeds[idx]);
                cfg.out_dir = dirs[idx];
                return synthesize_run(cfg);
            }));
        }
        for (size_t b = 0; b < batch; ++b) reports[next + b] = futs[b].get();
        next += batch;
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    int worst = 0;
    for (size_t i = 0; i < seeds.size(); ++i) {
        const RunReport& rep = reports[i];
        std::cout << "seed " << seeds[i] << ": status=" << static_cast<int>(rep.status)
                  << " converged=" << rep.converged << " J=" << format_double(rep.j_value)
                  << " el_residual=" << format_double(rep.el_residual)
                  << " terminal_rel=" << format_double(rep.terminal_norm_rel)
                  << " tie_fraction=" << format_double(rep.tie_fraction)
                  << " switches=" << rep.switch_count << " -> " << dirs[i] << "\n";
        worst = std::max(worst, static_cast<int>(rep.status));
    }
    std::cout << "wall_time_s " << wall << "\n";
    return worst;
}

int run_frequencies(const SystemArgs& sys_args, const RunFlags& flags) {
    const LtiSystem sys = build_system(sys_args);
    const double scale = sys.a.norm();
    const ForbiddenSet w =
        forbidden_set_W(eigenvalues(Matrix(sys.a.transpose())), 1e-8 * (scale > 0 ? scale : 1.0));
    std::cout.precision(12);
    std::cout << "W =";
    for (double v : w.values) std::cout << " " << v;
    std::cout << "\n";
    const FrequencyPlan plan = plan_frequencies(sys, sys.num_blocks(), flags.margin);
    for (size_t m = 0; m < plan.forbidden_sets.size(); ++m) {
        std::cout << "W_" << (m + 2) << " =";
        for (double v : plan.forbidden_sets[m].values) std::cout << " " << v;
        std::cout << "\n";
    }
    std::cout << "omega =";
    for (double v : plan.omegas) std::cout << " " << v;
    std::cout << "\n";
    if (!plan.note.empty()) std::cout << "note = " << plan.note << "\n";
    return 0;
}

int run_kalman(const SystemArgs& sys_args) {
    const LtiSystem sys = build_system(sys_args);
    const KalmanResult kal = kalman_check(sys);
    std::cout << "rank = " << kal.rank << "\ncontrollable = " << (kal.controllable ? 1 : 0) << "\n";
    return kal.controllable ? 0 : 2;
}

int run_check(const SystemArgs& sys_args, const RunFlags& flags, const std::string& controls_file) {
    const LtiSystem sys = build_system(sys_args);
    Vector y0;
    if (!flags.y0_values.empty()) {
        y0 = Vector(static_cast<Index>(flags.y0_values.size()));
        for (size_t i = 0; i < flags.y0_values.size(); ++i) y0[static_cast<Index>(i)] = flags.y0_values[i];
    } else if (!flags.y0_file.empty()) {
        y0 = read_vector_file(flags.y0_file, sys.dim());
    } else {
        y0 = Rng(flags.seed).unit_vector(sys.dim());
    }
    std::vector<Vector> source;
    if (flags.variant.rfind("source:", 0) == 0) {
        const TimeGrid grid(flags.horizon, flags.grid_n);
        source = read_source_file(flags.variant.substr(7), sys.dim(), grid.nodes());
    }
    const CheckReport rep = check_run(sys, flags.horizon, flags.grid_n, y0, controls_file, source);
    std::cout << "terminal_norm = " << format_double(rep.terminal_norm) << "\n"
              << "terminal_norm_rel = " << format_double(rep.terminal_norm_rel) << "\n"
              << "switching_valid = " << (rep.switching_valid ? 1 : 0) << "\n"
              << "switch_count = " << rep.switch_count << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"switching-control synthesis for y' + Ay = sum_i B_i u_i"};
    app.require_subcommand(1);

    SystemArgs sys_args;
    RunFlags flags;
    std::string controls_file;
    std::string demo_kind = "heat";

    auto* synth = app.add_subcommand("synthesize", "run the full synthesis pipeline");
    add_system_flags(synth, sys_args);
    add_run_flags(synth, flags);

    auto* freq = app.add_subcommand("frequencies", "print forbidden sets and chosen frequencies");
    add_system_flags(freq, sys_args);
    freq->add_option("--margin", flags.margin, "frequency separation margin");

    auto* kal = app.add_subcommand("kalman", "Kalman rank test");
    add_system_flags(kal, sys_args);

    auto* check = app.add_subcommand("check", "re-simulate an emitted controls file");
    add_system_flags(check, sys_args);
    add_run_flags(check, flags);
    check->add_option("controls", controls_file, "controls.csv to verify")->required();

    auto* demo = app.add_subcommand("demo", "canned run of a worked example");
    demo->add_option("kind", demo_kind, "heat|wave|coupled|random")->required();
    add_run_flags(demo, flags);
    demo->add_option("--d", sys_args.dim, "state/interior-node count");
    demo->add_option("--L", sys_args.length, "domain length");

    CLI11_PARSE(app, argc, argv);

    try {
        sys_args.seed = flags.seed;
        if (synth->parsed()) return run_synthesize(sys_args, flags);
        if (freq->parsed()) return run_frequencies(sys_args, flags);
        if (kal->parsed()) return run_kalman(sys_args);
        if (check->parsed()) return run_check(sys_args, flags, controls_file);
        if (demo->parsed()) {
            sys_args.kind = demo_kind;
            if (demo_kind == "wave") {
                flags.horizon = 2.0;
                flags.grid_n = 4000;
                if (sys_args.dim == 2) sys_args.dim = 2;
            } else if (demo_kind == "coupled") {
                sys_args.modes = 2;
            }
            return run_synthesize(sys_args, flags);
        }
    } catch (const std::invalid_argument& err) {
        std::cerr << "input error: " << err.what() << "\n";
        return 4;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 4;
    }
    return 0;
}
