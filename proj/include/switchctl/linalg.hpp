#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "switchctl/matrix.hpp"

namespace switchctl {

namespace detail {

// Degree-13 diagonal Pade coefficients (Higham 2005).
inline const double* pade13_coeffs() {
    static const double b[14] = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0,  129060195264000.0,   10559470521600.0,
        670442572800.0,      33522128640.0,       1323241920.0,
        40840800.0,          960960.0,            16380.0,
        182.0,               1.0};
    return b;
}

}  // namespace detail

// Matrix exponential by scaling-and-squaring with the degree-13 diagonal
// Pade approximant; squaring count from the 1-norm of the input.
inline Matrix expm(const Matrix& m) {
    require_square_finite(m, "expm");
    const Index n = m.rows();
    if (n == 0) return Matrix(0, 0);

    const double theta13 = 5.371920351148152;
    const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    }
    const Matrix a = m / std::ldexp(1.0, squarings);
    const double* b = detail::pade13_coeffs();

    const Matrix a2 = a * a;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a4 * a2;
    const Matrix ident = Matrix::Identity(n, n);

    Matrix u = a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) +
                    b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
    Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) +
               b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;

    Matrix r = (v - u).partialPivLu().solve(v + u);
    for (int i = 0; i < squarings; ++i) r = r * r;
    return r;
}

// Eigenvalues with algebraic multiplicities assigned by clustering.
struct Spectrum {
    // all eigenvalues, ordered by nondecreasing real part, ties by
    // nondecreasing imaginary part
    std::vector<Complex> values;
    // one entry per cluster: representative (cluster mean) and multiplicity
    std::vector<std::pair<Complex, int>> clusters;

    Index dimension() const { return static_cast<Index>(values.size()); }
};

namespace detail {

inline Spectrum cluster_spectrum(std::vector<Complex> vals, double cluster_tol) {
    std::sort(vals.begin(), vals.end(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    Spectrum spec;
    spec.values = vals;
    for (const Complex& v : vals) {
        if (!spec.clusters.empty()) {
            auto& [rep, mult] = spec.clusters.back();
            if (std::abs(v - rep) <= cluster_tol) {
                rep = (rep * static_cast<double>(mult) + v) / static_cast<double>(mult + 1);
                ++mult;
                continue;
            }
        }
        spec.clusters.emplace_back(v, 1);
    }
    return spec;
}

}  // namespace detail

// Backward-stable eigenvalues via Schur reduction (Hessenberg form plus
// shifted QR iteration, as implemented by Eigen's solvers).
inline Spectrum eigenvalues(const Matrix& m, double tol = 1e-8) {
    require_square_finite(m, "eigenvalues");
    if (m.rows() == 0) return Spectrum{};
    Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("eigenvalues: QR iteration did not converge within the iteration cap");
    const ComplexVector ev = solver.eigenvalues();
    std::vector<Complex> vals(ev.data(), ev.data() + ev.size());
    const double scale = m.norm();
    return detail::cluster_spectrum(std::move(vals), tol * (scale > 0.0 ? scale : 1.0));
}

inline Spectrum eigenvalues(const ComplexMatrix& m, double tol = 1e-8) {
    require(m.rows() == m.cols(), "eigenvalues: matrix must be square");
    require(m.allFinite(), "eigenvalues: matrix has non-finite entries");
    if (m.rows() == 0) return Spectrum{};
    Eigen::ComplexEigenSolver<ComplexMatrix> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("eigenvalues: QR iteration did not converge within the iteration cap");
    const ComplexVector ev = solver.eigenvalues();
    std::vector<Complex> vals(ev.data(), ev.data() + ev.size());
    const double scale = m.norm();
    return detail::cluster_spectrum(std::move(vals), tol * (scale > 0.0 ? scale : 1.0));
}

// Rank as the number of singular values above tol times the largest one.
inline Index numerical_rank(const Matrix& m, double tol = 1e-10) {
    require(m.allFinite(), "numerical_rank: matrix has non-finite entries");
    if (m.rows() == 0 || m.cols() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv[0] : 0.0;
    if (smax == 0.0) return 0;
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv[i] > tol * smax) ++rank;
    return rank;
}

inline Index numerical_rank(const ComplexMatrix& m, double tol = 1e-10) {
    require(m.allFinite(), "numerical_rank: matrix has non-finite entries");
    if (m.rows() == 0 || m.cols() == 0) return 0;
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    const Vector sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv[0] : 0.0;
    if (smax == 0.0) return 0;
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv[i] > tol * smax) ++rank;
    return rank;
}

}  // namespace switchctl
