#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "switchctl/linalg.hpp"
#include "switchctl/system.hpp"

namespace switchctl {

// Frequencies excluded when picking the oscillating-weight parameters:
// gaps (and half gaps) between imaginary parts of eigenvalues that share a
// real part, plus shifts of previously chosen frequencies.
struct ForbiddenSet {
    std::vector<double> values;  // sorted ascending, deduplicated
    std::string provenance;

    bool contains_zero(double tol = 0.0) const {
        for (double v : values)
            if (std::abs(v) <= tol) return true;
        return false;
    }

    double distance(double x) const {
        double best = std::numeric_limits<double>::infinity();
        for (double v : values) best = std::min(best, std::abs(x - v));
        return best;
    }
};

namespace detail {

inline void sort_dedupe(std::vector<double>& vals, double merge_tol) {
    std::sort(vals.begin(), vals.end());
    std::vector<double> out;
    for (double v : vals) {
        if (!out.empty() && std::abs(v - out.back()) <= merge_tol) continue;
        out.push_back(v);
    }
    vals = std::move(out);
}

// Imaginary-part gaps over ordered pairs of eigenvalues with (numerically)
// equal real parts.
inline std::vector<double> equal_real_part_gaps(const Spectrum& spec, double group_tol) {
    std::vector<double> gaps;
    const auto& v = spec.values;
    for (size_t k = 0; k < v.size(); ++k) {
        for (size_t k1 = 0; k1 < v.size(); ++k1) {
            if (k == k1) continue;
            if (std::abs(v[k].real() - v[k1].real()) <= group_tol)
                gaps.push_back(v[k].imag() - v[k1].imag());
        }
    }
    return gaps;
}

}  // namespace detail

// W = {0} u { Im(l_k) - Im(l_k1), (Im(l_k) - Im(l_k1))/2 : Re equal }.
inline ForbiddenSet forbidden_set_W(const Spectrum& spec, double group_tol) {
    ForbiddenSet w;
    w.provenance = "W";
    w.values.push_back(0.0);
    for (double g : detail::equal_real_part_gaps(spec, group_tol)) {
        w.values.push_back(g);
        w.values.push_back(0.5 * g);
    }
    detail::sort_dedupe(w.values, group_tol);
    return w;
}

// W_m = W_prev u union over previously chosen nonzero omega_j of
// { +-omega_j, +-omega_j + (Im(l_k) - Im(l_k1)) : Re equal }.
inline ForbiddenSet forbidden_set_next(const ForbiddenSet& w_prev,
                                       const std::vector<double>& chosen,
                                       const Spectrum& spec, double group_tol) {
    ForbiddenSet w;
    w.provenance = w_prev.provenance + "+shifts";
    w.values = w_prev.values;
    const std::vector<double> gaps = detail::equal_real_part_gaps(spec, group_tol);
    for (double omega : chosen) {
        if (omega == 0.0) continue;
        for (double s : {omega, -omega}) {
            w.values.push_back(s);
            for (double g : gaps) w.values.push_back(s + g);
        }
    }
    detail::sort_dedupe(w.values, group_tol);
    return w;
}

enum class FrequencyMode { self_adjoint, general };

struct FrequencyPlan {
    std::vector<double> omegas;
    double margin = 0.0;
    FrequencyMode mode = FrequencyMode::general;
    std::vector<ForbiddenSet> forbidden_sets;  // ladder W_2, W_3, ... (general mode)
    std::string note;
};

inline void validate(const FrequencyPlan& plan) {
    require(plan.margin > 0.0, "FrequencyPlan: margin must be positive");
    const auto& om = plan.omegas;
    if (plan.mode == FrequencyMode::self_adjoint) {
        int zeros = 0;
        for (size_t i = 0; i < om.size(); ++i) {
            require(om[i] >= 0.0, "FrequencyPlan: self-adjoint frequencies must be nonnegative");
            if (om[i] == 0.0) ++zeros;
            for (size_t j = i + 1; j < om.size(); ++j)
                require(om[i] != om[j], "FrequencyPlan: self-adjoint frequencies must be pairwise distinct");
        }
        require(zeros <= 1, "FrequencyPlan: at most one zero frequency admitted");
    } else {
        require(!om.empty() && om[0] == 0.0, "FrequencyPlan: general mode starts with omega_1 = 0");
        require(plan.forbidden_sets.size() + 1 == om.size(),
                "FrequencyPlan: one forbidden set per chosen nonzero frequency");
        for (size_t m = 1; m < om.size(); ++m) {
            const double dist = plan.forbidden_sets[m - 1].distance(om[m]);
            require(dist >= plan.margin, "FrequencyPlan: frequency too close to its forbidden set");
        }
    }
}

// Deterministic frequency selection. Self-adjoint systems take the
// arithmetic ladder (i-1)*margin; general systems walk the candidate ladder
// {margin, 2*margin, ...} and take the first value strictly farther than
// `margin` from the current forbidden set, then extend the set with the
// shifts of the chosen value.
inline FrequencyPlan plan_frequencies(const LtiSystem& sys, Index n, double margin,
                                      double group_tol_rel = 1e-8) {
    require(margin > 0.0, "plan_frequencies: margin must be positive");
    require(n >= 1, "plan_frequencies: need at least one control block");
    FrequencyPlan plan;
    plan.margin = margin;

    if (sys.structure == Structure::self_adjoint) {
        plan.mode = FrequencyMode::self_adjoint;
        for (Index i = 0; i < n; ++i) plan.omegas.push_back(static_cast<double>(i) * margin);
        plan.note = "zero frequency admitted for the first block only";
        validate(plan);
        return plan;
    }

    plan.mode = FrequencyMode::general;
    const double scale = sys.a.norm();
    const double group_tol = group_tol_rel * (scale > 0.0 ? scale : 1.0);
    const Spectrum spec = eigenvalues(Matrix(sys.a.transpose()), group_tol_rel);

    plan.omegas.push_back(0.0);
    ForbiddenSet current = forbidden_set_W(spec, group_tol);
    std::vector<double> chosen_nonzero;
    constexpr long kLadderCap = 1000000;
    for (Index m = 2; m <= n; ++m) {
        current = forbidden_set_next(forbidden_set_W(spec, group_tol), chosen_nonzero, spec, group_tol);
        current.provenance = "W_" + std::to_string(m);
        double picked = 0.0;
        bool found = false;
        for (long k = 1; k <= kLadderCap; ++k) {
            const double cand = static_cast<double>(k) * margin;
            if (current.distance(cand) > margin) {
                picked = cand;
                found = true;
                break;
            }
        }
        if (!found) throw std::runtime_error("plan_frequencies: candidate ladder exhausted");
        plan.omegas.push_back(picked);
        plan.forbidden_sets.push_back(current);
        chosen_nonzero.push_back(picked);
    }
    validate(plan);
    return plan;
}

// Oscillating weights alpha_i(t) = 1 + sin(omega_i t)/2; bounded in [1/2, 3/2].
struct WeightFamily {
    std::vector<double> omegas;

    explicit WeightFamily(std::vector<double> om = {}) : omegas(std::move(om)) {}
    explicit WeightFamily(const FrequencyPlan& plan) : omegas(plan.omegas) {}

    double alpha(Index i, double t) const {
        return 1.0 + 0.5 * std::sin(omegas[static_cast<size_t>(i)] * t);
    }
    Index size() const { return static_cast<Index>(omegas.size()); }
};

}  // namespace switchctl
