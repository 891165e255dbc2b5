#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "switchctl/simulate.hpp"
#include "switchctl/system.hpp"

namespace switchctl {

// 17 significant digits: lossless for binary64, so emitted files parse back
// bit-identically.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("parse_double: trailing characters in '" + s + "'");
    return v;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

// controls file: half-grid samples, one row per t_j = j h/2, with a 1-based
// active channel column and the flattened block values
inline void write_controls_csv(const std::string& path, const LtiSystem& sys, const TimeGrid& grid,
                               const HalfGridControls& hg) {
    std::ofstream out(path);
    require(out.good(), "write_controls_csv: cannot open " + path);
    out << "t,active_index";
    for (Index i = 0; i < sys.num_blocks(); ++i)
        for (Index c = 0; c < sys.block_dim(i); ++c)
            out << ",u_" << (i + 1) << "_" << (c + 1);
    out << "\n";
    const double half = grid.dt() / 2.0;
    for (Index j = 0; j < hg.samples(); ++j) {
        out << format_double(static_cast<double>(j) * half) << ","
            << (hg.active[static_cast<size_t>(j)] + 1);
        for (Index i = 0; i < sys.num_blocks(); ++i) {
            const Vector& u = hg.u[static_cast<size_t>(i)][static_cast<size_t>(j)];
            for (Index c = 0; c < u.size(); ++c) out << "," << format_double(u[c]);
        }
        out << "\n";
    }
}

struct ParsedControls {
    SwitchingControlSet node_controls;
    HalfGridControls half_grid;   // filled when the file carries midpoint rows
    bool has_half_grid = false;
};

inline ParsedControls read_controls_csv(const std::string& path, const LtiSystem& sys,
                                        const TimeGrid& grid) {
    std::ifstream in(path);
    require(in.good(), "read_controls_csv: cannot open " + path);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "read_controls_csv: empty file");
    const Index expected_cols = 2 + sys.total_inputs();
    require(static_cast<Index>(detail::split_csv_line(line).size()) == expected_cols,
            "read_controls_csv: column count does not match the system");

    std::vector<Index> active;
    std::vector<std::vector<Vector>> u(static_cast<size_t>(sys.num_blocks()));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        require(static_cast<Index>(cells.size()) == expected_cols, "read_controls_csv: ragged row");
        const long a = std::stol(cells[1]);
        require(a >= 1 && a <= sys.num_blocks(), "read_controls_csv: active index out of range");
        active.push_back(static_cast<Index>(a - 1));
        Index cell = 2;
        for (Index i = 0; i < sys.num_blocks(); ++i) {
            Vector ui(sys.block_dim(i));
            for (Index c = 0; c < ui.size(); ++c) ui[c] = parse_double(cells[static_cast<size_t>(cell++)]);
            u[static_cast<size_t>(i)].push_back(ui);
        }
    }
    const Index rows = static_cast<Index>(active.size());
    ParsedControls parsed;
    if (rows == 2 * grid.steps + 1) {
        parsed.has_half_grid = true;
        parsed.half_grid.active = active;
        parsed.half_grid.u = u;
        auto& cs = parsed.node_controls;
        cs.controls.resize(static_cast<size_t>(sys.num_blocks()));
        for (Index k = 0; k <= grid.steps; ++k) {
            cs.active.push_back(active[static_cast<size_t>(2 * k)]);
            for (Index i = 0; i < sys.num_blocks(); ++i)
                cs.controls[static_cast<size_t>(i)].push_back(u[static_cast<size_t>(i)][static_cast<size_t>(2 * k)]);
        }
    } else if (rows == grid.steps + 1) {
        parsed.node_controls.active = active;
        parsed.node_controls.controls = u;
    } else {
        throw std::invalid_argument("read_controls_csv: row count matches neither nodes nor half grid");
    }
    auto& cs = parsed.node_controls;
    for (Index k = 0; k + 1 < cs.nodes(); ++k)
        if (cs.active[static_cast<size_t>(k)] != cs.active[static_cast<size_t>(k + 1)]) ++cs.switch_count;
    return parsed;
}

inline void write_trajectory_csv(const std::string& path, const TimeGrid& grid, const Trajectory& traj) {
    std::ofstream out(path);
    require(out.good(), "write_trajectory_csv: cannot open " + path);
    const Index d = traj.y.empty() ? 0 : traj.y[0].size();
    out << "t";
    for (Index c = 0; c < d; ++c) out << ",y_" << (c + 1);
    out << "\n";
    for (Index k = 0; k < traj.nodes(); ++k) {
        out << format_double(grid.node(k));
        for (Index c = 0; c < d; ++c) out << "," << format_double(traj.y[static_cast<size_t>(k)][c]);
        out << "\n";
    }
}

inline void write_adjoint_csv(const std::string& path, const LtiSystem& sys, const TimeGrid& grid,
                              const AdjointTrace& trace) {
    std::ofstream out(path);
    require(out.good(), "write_adjoint_csv: cannot open " + path);
    out << "t";
    for (Index i = 0; i < sys.num_blocks(); ++i)
        for (Index c = 0; c < sys.block_dim(i); ++c)
            out << ",eta_" << (i + 1) << "_" << (c + 1);
    out << "\n";
    for (Index k = 0; k < trace.nodes(); ++k) {
        out << format_double(grid.node(k));
        for (Index i = 0; i < sys.num_blocks(); ++i) {
            const Vector& e = trace.traces[static_cast<size_t>(i)][static_cast<size_t>(k)];
            for (Index c = 0; c < e.size(); ++c) out << "," << format_double(e[c]);
        }
        out << "\n";
    }
}

// Plain-text system description: header "d n m_1 ... m_n", then A row-major,
// then each B_i row-major; whitespace separated. See docs/formats.md.
inline LtiSystem read_system_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "read_system_file: cannot open " + path);
    long d = 0, n = 0;
    require(static_cast<bool>(in >> d >> n), "read_system_file: bad header");
    require(d >= 1 && n >= 1, "read_system_file: header dimensions must be positive");
    std::vector<long> widths(static_cast<size_t>(n));
    for (auto& w : widths) {
        require(static_cast<bool>(in >> w), "read_system_file: bad header");
        require(w >= 1, "read_system_file: block widths must be positive");
    }
    auto read_matrix = [&](long rows, long cols) {
        Matrix m(rows, cols);
        for (long r = 0; r < rows; ++r)
            for (long c = 0; c < cols; ++c) {
                double v = 0.0;
                require(static_cast<bool>(in >> v), "read_system_file: not enough values");
                m(r, c) = v;
            }
        return m;
    };
    LtiSystem sys;
    sys.a = read_matrix(d, d);
    for (long w : widths) sys.blocks.push_back(read_matrix(d, w));
    sys.label = "file:" + path;
    sys.structure = Structure::general;
    {
        const double scale = sys.a.norm();
        if ((sys.a - sys.a.transpose()).norm() <= 1e-12 * (scale > 0 ? scale : 1.0)) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(sys.a, Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() > 0.0) sys.structure = Structure::self_adjoint;
        }
    }
    validate(sys);
    return sys;
}

inline Vector read_vector_file(const std::string& path, Index expected) {
    std::ifstream in(path);
    require(in.good(), "read_vector_file: cannot open " + path);
    std::vector<double> vals;
    double v = 0.0;
    while (in >> v) vals.push_back(v);
    require(static_cast<Index>(vals.size()) == expected, "read_vector_file: wrong value count");
    Vector out(expected);
    for (Index i = 0; i < expected; ++i) out[i] = vals[static_cast<size_t>(i)];
    return out;
}

// source samples: one row per grid node, d values each
inline std::vector<Vector> read_source_file(const std::string& path, Index dim, Index nodes) {
    std::ifstream in(path);
    require(in.good(), "read_source_file: cannot open " + path);
    std::vector<Vector> samples;
    samples.reserve(static_cast<size_t>(nodes));
    for (Index k = 0; k < nodes; ++k) {
        Vector f(dim);
        for (Index c = 0; c < dim; ++c)
            require(static_cast<bool>(in >> f[c]), "read_source_file: not enough values");
        samples.push_back(f);
    }
    return samples;
}

}  // namespace switchctl
