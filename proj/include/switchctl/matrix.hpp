#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace switchctl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using Complex = std::complex<double>;
using Index = Eigen::Index;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }
inline bool all_finite(const ComplexMatrix& m) { return m.allFinite(); }

inline void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

inline void require_square_finite(const Matrix& m, const char* who) {
    require(m.rows() == m.cols(), std::string(who) + ": matrix must be square");
    require(m.allFinite(), std::string(who) + ": matrix has non-finite entries");
}

}  // namespace switchctl
