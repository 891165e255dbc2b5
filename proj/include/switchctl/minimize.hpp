#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

#include "switchctl/functional.hpp"

namespace switchctl {

struct MinimizeOptions {
    double tol = 1e-6;       // normalized Euler-Lagrange residual target
    Index max_iter = 2000;   // total budget over smoothing stages and polish
    double tie_tol = 1e-9;   // relative gap counted as a tie in diagnostics
};

struct MinimizationResult {
    Vector z_terminal;
    double j_value = 0.0;
    double el_residual = 0.0;
    Index iterations = 0;
    std::vector<double> smoothing_path;
    bool converged = false;
    double tie_fraction = 0.0;
};

namespace detail {

struct SmoothedEval {
    double value = 0.0;
    Vector grad;
};

// softmax-smoothed objective: max_i q_i replaced by mu*log sum exp(q_i/mu),
// |z| replaced by sqrt(|z|^2 + nu^2)
inline SmoothedEval eval_smoothed(const Objective& obj, const Vector& z, double mu, double nu) {
    const Index n = obj.channels();
    std::vector<Vector> etas(static_cast<size_t>(n));
    std::vector<double> q(static_cast<size_t>(n));
    std::vector<double> sigma(static_cast<size_t>(n));
    SmoothedEval out;
    out.grad = obj.linear_term;
    double quad = 0.0;
    for (Index k = 0; k <= obj.grid.steps; ++k) {
        channel_energies(obj, z, k, etas, q);
        const double m = *std::max_element(q.begin(), q.end());
        double s = 0.0;
        for (Index i = 0; i < n; ++i) {
            sigma[static_cast<size_t>(i)] = std::exp((q[static_cast<size_t>(i)] - m) / mu);
            s += sigma[static_cast<size_t>(i)];
        }
        quad += obj.quad_weights[static_cast<size_t>(k)] * (m + mu * std::log(s));
        const double wk = obj.quad_weights[static_cast<size_t>(k)];
        for (Index i = 0; i < n; ++i) {
            const double coeff = wk * (sigma[static_cast<size_t>(i)] / s) *
                                 obj.alpha_at[static_cast<size_t>(i)][static_cast<size_t>(k)];
            if (coeff == 0.0) continue;
            const auto& map = obj.stack.channel_maps[static_cast<size_t>(i)][static_cast<size_t>(k)];
            out.grad.noalias() += coeff * (map.transpose() * etas[static_cast<size_t>(i)]);
        }
    }
    out.value = 0.5 * quad + obj.linear_term.dot(z);
    if (obj.variant == Variant::approximate) {
        const double r = std::sqrt(z.squaredNorm() + nu * nu);
        out.value += obj.epsilon * r;
        if (r > 0.0) out.grad += (obj.epsilon / r) * z;
    }
    return out;
}

// limited-memory BFGS with Armijo backtracking
inline Index lbfgs(const Objective& obj, Vector& z, double mu, double nu, double grad_tol,
                   Index max_iters) {
    constexpr int kMemory = 10;
    std::deque<Vector> s_hist, y_hist;
    std::deque<double> rho_hist;

    SmoothedEval cur = eval_smoothed(obj, z, mu, nu);
    Index iters = 0;
    int stagnant = 0;
    double best_seen = cur.value;
    while (iters < max_iters && cur.grad.norm() > grad_tol && stagnant < 12) {
        // two-loop recursion
        Vector dir = -cur.grad;
        std::vector<double> alpha_coef(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            alpha_coef[static_cast<size_t>(i)] =
                rho_hist[static_cast<size_t>(i)] * s_hist[static_cast<size_t>(i)].dot(dir);
            dir -= alpha_coef[static_cast<size_t>(i)] * y_hist[static_cast<size_t>(i)];
        }
        if (!s_hist.empty()) {
            const Vector& s = s_hist.back();
            const Vector& y = y_hist.back();
            dir *= s.dot(y) / y.squaredNorm();
        }
        for (size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(dir);
            dir += (alpha_coef[i] - beta) * s_hist[i];
        }
        double slope = cur.grad.dot(dir);
        if (slope >= 0.0) {  // fall back to steepest descent
            dir = -cur.grad;
            slope = -cur.grad.squaredNorm();
        }

        double step = 1.0;
        SmoothedEval next;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            next = eval_smoothed(obj, z + step * dir, mu, nu);
            if (next.value <= cur.value + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        ++iters;
        if (!accepted) break;

        const Vector s = step * dir;
        const Vector y = next.grad - cur.grad;
        const double sy = s.dot(y);
        if (sy > 1e-14 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > kMemory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        z += s;
        cur = next;
        if (cur.value < best_seen - 1e-16 * std::max(1.0, std::abs(best_seen))) {
            best_seen = cur.value;
            stagnant = 0;
        } else {
            ++stagnant;
        }
    }
    return iters;
}

inline std::vector<Index> active_partition_of(const Objective& obj, const Vector& z) {
    const Index n = obj.channels();
    std::vector<Vector> etas(static_cast<size_t>(n));
    std::vector<double> q(static_cast<size_t>(n));
    std::vector<Index> part(static_cast<size_t>(obj.grid.nodes()));
    for (Index k = 0; k <= obj.grid.steps; ++k) {
        channel_energies(obj, z, k, etas, q);
        part[static_cast<size_t>(k)] = argmax_smallest_tie(q);
    }
    return part;
}

inline Matrix partition_gramian(const Objective& obj, const std::vector<Index>& part) {
    const Index d = obj.dim();
    Matrix g = Matrix::Zero(d, d);
    for (Index k = 0; k <= obj.grid.steps; ++k) {
        const Index i = part[static_cast<size_t>(k)];
        const auto& map = obj.stack.channel_maps[static_cast<size_t>(i)][static_cast<size_t>(k)];
        g.noalias() += (obj.quad_weights[static_cast<size_t>(k)] *
                        obj.alpha_at[static_cast<size_t>(i)][static_cast<size_t>(k)]) *
                       (map.transpose() * map);
    }
    return g;
}

// mean-weighted Gramian over all channels; positive definite whenever the
// Kalman condition holds and the grid resolves the flow
inline Matrix mean_gramian(const Objective& obj) {
    const Index d = obj.dim();
    const Index n = obj.channels();
    Matrix g = Matrix::Zero(d, d);
    for (Index k = 0; k <= obj.grid.steps; ++k) {
        for (Index i = 0; i < n; ++i) {
            const auto& map = obj.stack.channel_maps[static_cast<size_t>(i)][static_cast<size_t>(k)];
            g.noalias() += (obj.quad_weights[static_cast<size_t>(k)] *
                            obj.alpha_at[static_cast<size_t>(i)][static_cast<size_t>(k)] /
                            static_cast<double>(n)) *
                           (map.transpose() * map);
        }
    }
    return g;
}

inline Vector solve_spd(const Matrix& g, const Vector& rhs) {
    Matrix m = g;
    const double ridge0 = 1e-14 * (g.trace() / static_cast<double>(g.rows()) + 1e-300);
    for (int attempt = 0; attempt < 4; ++attempt) {
        Eigen::LDLT<Matrix> ldlt(m);
        if (ldlt.info() == Eigen::Success) {
            Vector x = ldlt.solve(rhs);
            if (x.allFinite()) return x;
        }
        m += ridge0 * std::pow(10.0, attempt) * Matrix::Identity(g.rows(), g.cols());
    }
    return Matrix(g).completeOrthogonalDecomposition().solve(rhs);
}

// minimizer of 1/2 z^T G z + b^T z + eps |z|, via the secular equation for
// the multiplier s = eps/|z|
inline Vector solve_ball_regularized(const Matrix& g, const Vector& b, double eps) {
    if (b.norm() <= eps) return Vector::Zero(b.size());
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    const Vector lam = es.eigenvalues();
    const Vector bt = es.eigenvectors().transpose() * b;
    auto radius = [&](double s) {
        double r2 = 0.0;
        for (Index i = 0; i < lam.size(); ++i) {
            const double den = std::max(lam[i], 0.0) + s;
            r2 += (bt[i] * bt[i]) / (den * den);
        }
        return std::sqrt(r2);
    };
    double lo = 0.0, hi = std::max(b.norm(), 1e-30);
    while (hi * radius(hi) < eps && hi < 1e300) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid * radius(mid) < eps)
            lo = mid;
        else
            hi = mid;
    }
    const double s = 0.5 * (lo + hi);
    Vector zt(b.size());
    for (Index i = 0; i < lam.size(); ++i) zt[i] = -bt[i] / (std::max(lam[i], 0.0) + s);
    return es.eigenvectors() * zt;
}

// exact minimization of J along the ray {theta z}: the argmax partition is
// invariant under positive scaling, so J(theta z) = theta^2 Q + theta L (+
// theta eps |z| for the approximate variant, still handled by the golden
// search below)
inline double quadratic_part(const Objective& obj, const Vector& z) {
    const Index n = obj.channels();
    std::vector<Vector> etas(static_cast<size_t>(n));
    std::vector<double> q(static_cast<size_t>(n));
    double quad = 0.0;
    for (Index k = 0; k <= obj.grid.steps; ++k) {
        channel_energies(obj, z, k, etas, q);
        quad += obj.quad_weights[static_cast<size_t>(k)] * (*std::max_element(q.begin(), q.end()));
    }
    return 0.5 * quad;
}

// golden-section minimum of the convex restriction theta -> J(z + theta d)
inline double segment_minimum(const Objective& obj, const Vector& z, const Vector& dir) {
    const double inv_phi = 0.6180339887498949;
    double lo = 0.0, hi = 1.0;
    double t1 = hi - inv_phi * (hi - lo), t2 = lo + inv_phi * (hi - lo);
    double f1 = eval_J(obj, Vector(z + t1 * dir));
    double f2 = eval_J(obj, Vector(z + t2 * dir));
    for (int it = 0; it < 90; ++it) {
        if (f1 <= f2) {
            hi = t2;
            t2 = t1;
            f2 = f1;
            t1 = hi - inv_phi * (hi - lo);
            f1 = eval_J(obj, Vector(z + t1 * dir));
        } else {
            lo = t1;
            t1 = t2;
            f1 = f2;
            t2 = lo + inv_phi * (hi - lo);
            f2 = eval_J(obj, Vector(z + t2 * dir));
        }
    }
    return 0.5 * (lo + hi);
}

// nodes whose top-two energies agree to rel_gap of the node's top value
inline std::vector<std::pair<Index, Index>> near_tie_nodes(const Objective& obj, const Vector& z,
                                                           double rel_gap, size_t cap) {
    const Index n = obj.channels();
    if (n < 2) return {};
    std::vector<Vector> etas(static_cast<size_t>(n));
    std::vector<double> q(static_cast<size_t>(n));
    std::vector<std::pair<Index, Index>> out;  // (node, runner-up channel)
    for (Index k = 0; k <= obj.grid.steps && out.size() < cap; ++k) {
        channel_energies(obj, z, k, etas, q);
        Index bi = 0, si = -1;
        double best = -1.0, second = -1.0;
        for (Index i = 0; i < n; ++i) {
            const double v = q[static_cast<size_t>(i)];
            if (v > best) {
                second = best;
                si = bi;
                best = v;
                bi = i;
            } else if (v > second) {
                second = v;
                si = i;
            }
        }
        if (best > 0.0 && best - second <= rel_gap * best) out.emplace_back(k, si);
    }
    return out;
}

// Euler-Lagrange residual walk. Inside one partition piece the residual
// r(z) = G_P z + b is affine and vanishes at the refit point, so moving
// toward it scales |r| by exactly (1 - theta) until the partition flips.
// Walk to just before each flip, then step across and re-fit; the best
// point by residual is kept subject to staying near-optimal in J.
inline Vector residual_walk(const Objective& obj, const Vector& start, double j_slack_abs,
                            Index& iteration_counter, Index budget) {
    const Vector& b = obj.linear_term;
    Vector z = start;
    Vector best = start;
    double best_res = el_residual(obj, start);
    const double j_cap = eval_J(obj, start) + j_slack_abs;

    for (Index step = 0; step < budget; ++step) {
        ++iteration_counter;
        const std::vector<Index> part = active_partition_of(obj, z);
        const Vector z_fit = solve_spd(partition_gramian(obj, part), Vector(-b));
        const Vector dir = z_fit - z;
        if (dir.norm() == 0.0) break;
        if (active_partition_of(obj, z_fit) == part) {
            if (eval_J(obj, z_fit) <= j_cap) {
                best = z_fit;  // exact zero of the residual inside the piece
            }
            break;
        }
        // largest step keeping the partition fixed
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 50; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (active_partition_of(obj, Vector(z + mid * dir)) == part)
                lo = mid;
            else
                hi = mid;
        }
        if (lo > 0.0) {
            const Vector z_edge = z + lo * dir;
            const double res_edge = el_residual(obj, z_edge);
            if (res_edge < best_res && eval_J(obj, z_edge) <= j_cap) {
                best_res = res_edge;
                best = z_edge;
            }
        }
        // cross the face and continue from the neighboring piece
        const Vector z_next = z + std::min(1.0, hi) * dir;
        if ((z_next - z).norm() <= 1e-17 * std::max(1.0, z.norm())) break;
        z = z_next;
        const double res_here = el_residual(obj, z);
        if (res_here < best_res && eval_J(obj, z) <= j_cap) {
            best_res = res_here;
            best = z;
        }
    }
    return best;
}

// Tangential least squares along active tie faces. At a kink minimum the
// residual r = G_P z + b cannot vanish across the faces, but its component
// in G_P times the face-tangent space can: move along the tangent, then
// correct along the normals so the tied nodes stay on the current side.
inline Vector face_tangent_polish(const Objective& obj, const Vector& start, Index& iteration_counter,
                                  int rounds = 10) {
    const Index d = obj.dim();
    const Index n = obj.channels();
    if (n < 2) return start;
    const Vector& b = obj.linear_term;
    Vector z = start;
    Vector best = start;
    double best_res = el_residual(obj, start);

    for (int round = 0; round < rounds; ++round) {
        ++iteration_counter;
        const auto faces = near_tie_nodes(obj, z, 1e-6, 4);
        if (faces.empty()) break;
        const std::vector<Index> part = active_partition_of(obj, z);

        std::vector<Vector> etas(static_cast<size_t>(n));
        std::vector<double> q(static_cast<size_t>(n));
        Matrix normals(d, static_cast<Index>(faces.size()));
        for (size_t f = 0; f < faces.size(); ++f) {
            const auto [k, runner_up] = faces[f];
            channel_energies(obj, z, k, etas, q);
            const Index i = part[static_cast<size_t>(k)];
            const Index j = runner_up;
            const Vector gi = obj.stack.channel_maps[static_cast<size_t>(i)][static_cast<size_t>(k)].transpose() *
                              etas[static_cast<size_t>(i)];
            const Vector gj = obj.stack.channel_maps[static_cast<size_t>(j)][static_cast<size_t>(k)].transpose() *
                              etas[static_cast<size_t>(j)];
            normals.col(static_cast<Index>(f)) =
                2.0 * (obj.alpha_at[static_cast<size_t>(i)][static_cast<size_t>(k)] * gi -
                       obj.alpha_at[static_cast<size_t>(j)][static_cast<size_t>(k)] * gj);
        }
        Eigen::HouseholderQR<Matrix> qr(normals);
        const Matrix q_thin = qr.householderQ() * Matrix::Identity(d, normals.cols());
        const Matrix tangent_proj = Matrix::Identity(d, d) - q_thin * q_thin.transpose();

        const Matrix g = partition_gramian(obj, part);
        const Vector r = g * z + b;
        const Matrix m = g * tangent_proj;
        const Vector tau = tangent_proj * m.completeOrthogonalDecomposition().solve(Vector(-r));
        if (tau.norm() == 0.0) break;

        // the frozen-partition model is only valid inside the current piece;
        // flips at the tied faces themselves are side noise and are restored
        // by the normal correction below
        std::vector<bool> is_face(part.size(), false);
        for (const auto& [k, runner_up] : faces) is_face[static_cast<size_t>(k)] = true;
        auto stable = [&](const Vector& cand) {
            const std::vector<Index> p = active_partition_of(obj, cand);
            for (size_t k = 0; k < part.size(); ++k)
                if (!is_face[k] && p[k] != part[k]) return false;
            return true;
        };
        double lo = 0.0, hi = 1.0;
        if (!stable(Vector(z + tau))) {
            for (int it = 0; it < 40; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (stable(Vector(z + mid * tau)))
                    lo = mid;
                else
                    hi = mid;
            }
        } else {
            lo = 1.0;
        }
        if (lo <= 0.0) break;
        Vector z_try = z + 0.98 * lo * tau;
        // normal correction: keep each tied node weakly on its current side
        for (size_t f = 0; f < faces.size(); ++f) {
            const auto [k, runner_up] = faces[f];
            channel_energies(obj, z_try, k, etas, q);
            const Index i = part[static_cast<size_t>(k)];
            const double gap = q[static_cast<size_t>(i)] - q[static_cast<size_t>(runner_up)];
            if (gap >= 0.0) continue;
            const Vector nf = normals.col(static_cast<Index>(f));
            const double slope = nf.squaredNorm();
            if (slope > 0.0) z_try += (-gap / slope + 1e-12) * nf;
        }
        const double res = el_residual(obj, z_try);
        if (res < best_res) {
            best_res = res;
            best = z_try;
        }
        z = z_try;  // continue exploring even on a flat round
    }
    return best;
}

inline double tie_fraction_of(const Objective& obj, const Vector& z, double tie_tol) {
    const Index n = obj.channels();
    std::vector<Vector> etas(static_cast<size_t>(n));
    std::vector<double> q(static_cast<size_t>(n));
    std::vector<double> top(static_cast<size_t>(obj.grid.nodes()));
    std::vector<double> gap(static_cast<size_t>(obj.grid.nodes()));
    double scale = 0.0;
    for (Index k = 0; k <= obj.grid.steps; ++k) {
        channel_energies(obj, z, k, etas, q);
        double best = -1.0, second = -1.0;
        for (double v : q) {
            if (v > best) {
                second = best;
                best = v;
            } else if (v > second) {
                second = v;
            }
        }
        top[static_cast<size_t>(k)] = best;
        gap[static_cast<size_t>(k)] = (n >= 2) ? best - second : std::numeric_limits<double>::infinity();
        scale = std::max(scale, best);
    }
    if (scale == 0.0) return 1.0;
    Index ties = 0;
    for (Index k = 0; k <= obj.grid.steps; ++k)
        if (gap[static_cast<size_t>(k)] <= tie_tol * top[static_cast<size_t>(k)]) ++ties;
    return static_cast<double>(ties) / static_cast<double>(obj.grid.nodes());
}

}  // namespace detail

// Smoothing homotopy (softmax with decreasing mu), limited-memory
// quasi-Newton per stage, then a nonsmooth polish: exact refits of the
// quadratic piece selected by the current active partition, with Polyak-type
// subgradient steps whenever a refit fails to make progress.
inline MinimizationResult minimize(const Objective& obj, const MinimizeOptions& opts = {}) {
    {
        const KalmanResult kal = kalman_check(obj.sys);
        require(kal.controllable, "minimize: system fails the Kalman rank condition");
    }
    const Index d = obj.dim();
    MinimizationResult res;

    const Vector& b = obj.linear_term;
    Vector z = detail::solve_spd(detail::mean_gramian(obj), Vector(-b));
    {
        // exact rescale along the ray: the partition is scale invariant
        const double quad = detail::quadratic_part(obj, z);
        const double lin = b.dot(z);
        if (quad > 0.0) z *= std::clamp(-lin / (2.0 * quad), 0.0, 4.0);
    }
    double j_cur = eval_J(obj, z);

    // smoothing stages
    for (int stage = 0; stage <= 6 && res.iterations < opts.max_iter; ++stage) {
        const double mu_rel = std::pow(10.0, -stage);
        const Index n = obj.channels();
        std::vector<Vector> etas(static_cast<size_t>(n));
        std::vector<double> q(static_cast<size_t>(n));
        double q_scale = 0.0;
        double quad_mag = 0.0;
        for (Index k = 0; k <= obj.grid.steps; ++k) {
            detail::channel_energies(obj, z, k, etas, q);
            const double top = *std::max_element(q.begin(), q.end());
            q_scale = std::max(q_scale, top);
            quad_mag += obj.quad_weights[static_cast<size_t>(k)] * top;
        }
        if (q_scale <= 0.0) break;
        const double mu = mu_rel * q_scale;
        const double nu = mu_rel * std::max(z.norm(), 1e-30);
        res.smoothing_path.push_back(mu);
        const double den = obj.y0.norm() + quad_mag + 1e-300;
        const double grad_tol = std::max(opts.tol * 10.0 * den, 1e-300);
        res.iterations += detail::lbfgs(obj, z, mu, nu, grad_tol,
                                        std::min<Index>(200, opts.max_iter - res.iterations));
    }
    j_cur = eval_J(obj, z);

    // nonsmooth polish: exact refit of the quadratic piece picked by the
    // current partition; a segment search when the full refit leaves the
    // piece; near-tie flips to locate an interior fixpoint the refit steps
    // over; Polyak-type subgradient steps as the fallback
    Vector z_best = z;
    double j_best = j_cur;
    double gamma = std::max(1e-3 * std::abs(j_best), 1e-18);
    auto refit = [&](const std::vector<Index>& part) {
        const Matrix g = detail::partition_gramian(obj, part);
        if (obj.variant == Variant::approximate)
            return detail::solve_ball_regularized(g, b, obj.epsilon);
        return detail::solve_spd(g, Vector(-b));
    };
    for (int outer = 0; outer < 120 && res.iterations < opts.max_iter; ++outer) {
        // always attempt the refit first: in the smooth case it lands on the
        // exact piece minimum and the certificate drops to solver precision
        if (outer > 0 && el_residual(obj, z_best) <= opts.tol) break;
        ++res.iterations;

        const std::vector<Index> part = detail::active_partition_of(obj, z);
        const Vector z_cand = refit(part);
        const double j_cand = eval_J(obj, z_cand);

        const bool is_fixpoint = detail::active_partition_of(obj, z_cand) == part;
        if (is_fixpoint && j_cand <= j_best + 1e-14 * std::abs(j_best)) {
            z = z_cand;
            j_cur = j_cand;
            if (j_cand < j_best) {
                j_best = j_cand;
                z_best = z_cand;
            }
            continue;  // fixpoint shows up as a small residual at loop top
        }
        if (j_cand < j_best - 1e-15 * std::abs(j_best)) {
            z = z_cand;
            j_cur = j_cand;
            j_best = j_cand;
            z_best = z_cand;
            continue;
        }

        // refit left its piece without improving: descend along the segment
        const Vector dir = z_cand - z;
        if (dir.norm() > 0.0) {
            const double theta = detail::segment_minimum(obj, z, dir);
            const Vector z_seg = z + theta * dir;
            const double j_seg = eval_J(obj, z_seg);
            if (j_seg < j_best - 1e-15 * std::abs(j_best)) {
                z = z_seg;
                j_cur = j_seg;
                j_best = j_seg;
                z_best = z_seg;
                continue;
            }
        }

        // flip the runner-up channel at near-tied nodes; an interior
        // fixpoint there is a minimum the plain refit kept stepping over
        bool flipped = false;
        for (const auto& [node, runner_up] : detail::near_tie_nodes(obj, z_best, 1e-7, 6)) {
            std::vector<Index> flipped_part = detail::active_partition_of(obj, z_best);
            flipped_part[static_cast<size_t>(node)] = runner_up;
            const Vector z_flip = refit(flipped_part);
            const double j_flip = eval_J(obj, z_flip);
            if (j_flip <= j_best + 1e-14 * std::abs(j_best) &&
                detail::active_partition_of(obj, z_flip) == flipped_part) {
                z = z_flip;
                j_cur = j_flip;
                z_best = z_flip;
                j_best = std::min(j_best, j_flip);
                flipped = true;
                break;
            }
        }
        if (flipped) {
            if (el_residual(obj, z_best) <= opts.tol) break;
            continue;
        }

        // Polyak-type subgradient steps against the best value seen
        bool improved = false;
        for (int step = 0; step < 10 && res.iterations < opts.max_iter; ++step) {
            const Vector sg = subgradient_J(obj, z);
            const double sg2 = sg.squaredNorm();
            if (sg2 <= 0.0) break;
            const double lam = (j_cur - j_best + gamma) / sg2;
            z -= lam * sg;
            j_cur = eval_J(obj, z);
            ++res.iterations;
            if (j_cur < j_best) {
                j_best = j_cur;
                z_best = z;
                improved = true;
            }
        }
        if (!improved) {
            gamma *= 0.25;
            if (gamma < 1e-60) break;
        }
    }

    // at a kink minimum the tie-broken residual cannot vanish at the exact
    // minimizer; walk the certificate down along nearby pieces, then slide
    // tangentially along the active faces (the certificate is also the
    // reachable terminal norm, so push it well below the tolerance)
    if (obj.variant != Variant::approximate && el_residual(obj, z_best) > 0.01 * opts.tol &&
        res.iterations < opts.max_iter) {
        const double slack = std::max(1e-10 * std::abs(j_best), 1e-16 * (1.0 + obj.y0.norm()));
        const Vector walked = detail::residual_walk(obj, z_best, slack, res.iterations,
                                                    std::min<Index>(60, opts.max_iter - res.iterations));
        if (el_residual(obj, walked) < el_residual(obj, z_best)) z_best = walked;
        const Vector slid = detail::face_tangent_polish(obj, z_best, res.iterations, 24);
        if (el_residual(obj, slid) < el_residual(obj, z_best)) z_best = slid;
    }

    res.z_terminal = z_best;
    res.j_value = eval_J(obj, z_best);
    res.el_residual = el_residual(obj, z_best);
    res.converged = res.el_residual <= opts.tol;
    res.tie_fraction = detail::tie_fraction_of(obj, z_best, opts.tie_tol);
    return res;
}

}  // namespace switchctl
