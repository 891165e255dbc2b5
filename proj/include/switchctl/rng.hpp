#pragma once

#include <cstdint>
#include <random>

#include "switchctl/matrix.hpp"

namespace switchctl {

// Seeded generator with a fixed bit-to-double mapping, so identical seeds
// give identical streams regardless of the standard library's
// uniform_real_distribution implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller (always consumes two draws)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    Vector normal_vector(Index n) {
        Vector v(n);
        for (Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    Vector unit_vector(Index n) {
        Vector v = normal_vector(n);
        double nrm = v.norm();
        while (nrm < 1e-12) {
            v = normal_vector(n);
            nrm = v.norm();
        }
        return v / nrm;
    }

    Matrix uniform_matrix(Index rows, Index cols, double lo = -1.0, double hi = 1.0) {
        Matrix m(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) m(i, j) = uniform(lo, hi);
        return m;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace switchctl
