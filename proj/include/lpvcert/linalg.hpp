#pragma once

#include <algorithm>
#include <vector>

#include <Eigen/Dense>

#include "lpvcert/complex_matrix.hpp"
#include "lpvcert/errors.hpp"

namespace lpvcert {

/// Default relative tolerance for rank and positivity decisions.
inline constexpr double kDefaultTol = 1e-8;

inline Eigen::MatrixXcd to_eigen(const ComplexMatrix& m) {
    Eigen::MatrixXcd e(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
    return e;
}

inline ComplexMatrix from_eigen(const Eigen::MatrixXcd& e) {
    ComplexMatrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
    for (Eigen::Index i = 0; i < e.rows(); ++i)
        for (Eigen::Index j = 0; j < e.cols(); ++j)
            m(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = e(i, j);
    return m;
}

/// All singular values, descending.
inline std::vector<double> singular_values(const ComplexMatrix& m) {
    if (m.empty())
        throw EmptyMatrixError("singular_values of empty matrix");
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(to_eigen(m));
    const auto& sv = svd.singularValues();
    std::vector<double> out(sv.data(), sv.data() + sv.size());
    return out;
}

struct SigmaExtremes {
    double sigma_min = 0.0;
    double sigma_max = 0.0;
};

/// Smallest and largest singular value of m.
inline SigmaExtremes svd_extremes(const ComplexMatrix& m) {
    const auto sv = singular_values(m);
    return {sv.back(), sv.front()};
}

inline double spectral_norm(const ComplexMatrix& m) { return svd_extremes(m).sigma_max; }

/// Eigenvalues of a square matrix, with multiplicity. Order is the solver's;
/// callers needing determinism sort explicitly.
inline std::vector<cplx> eigenvalues(const ComplexMatrix& m) {
    if (!m.square())
        throw NotSquareError("eigenvalues of non-square matrix");
    if (m.empty())
        throw EmptyMatrixError("eigenvalues of empty matrix");
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(to_eigen(m), /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw Error("eigenvalue iteration failed to converge");
    const auto& ev = es.eigenvalues();
    return std::vector<cplx>(ev.data(), ev.data() + ev.size());
}

inline std::vector<cplx> sorted_eigenvalues(const ComplexMatrix& m) {
    auto ev = eigenvalues(m);
    std::sort(ev.begin(), ev.end(), [](const cplx& a, const cplx& b) {
        if (a.real() != b.real())
            return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return ev;
}

inline cplx determinant(const ComplexMatrix& m) {
    if (!m.square())
        throw NotSquareError("determinant of non-square matrix");
    if (m.empty())
        throw EmptyMatrixError("determinant of empty matrix");
    return to_eigen(m).determinant();
}

/// Number of singular values above tol_rel * max(1, sigma_max).
inline std::size_t numerical_rank(const ComplexMatrix& m, double tol_rel = kDefaultTol) {
    if (m.empty())
        throw EmptyMatrixError("numerical_rank of empty matrix");
    if (!(tol_rel > 0.0))
        throw Error("numerical_rank: tol_rel must be positive");
    const auto sv = singular_values(m);
    const double threshold = tol_rel * std::max(1.0, sv.front());
    std::size_t r = 0;
    for (double s : sv)
        if (s > threshold)
            ++r;
    return r;
}

/// Rank threshold used everywhere a singular value is compared against zero.
inline double rank_threshold(double sigma_max, double tol_rel = kDefaultTol) {
    return tol_rel * std::max(1.0, sigma_max);
}

/// Minimum-norm least-squares solution of A x = b.
inline ComplexMatrix least_squares(const ComplexMatrix& a, const ComplexMatrix& b, double tol_rel = kDefaultTol) {
    if (a.empty())
        throw EmptyMatrixError("least_squares with empty matrix");
    if (a.rows() != b.rows())
        throw ShapeMismatchError("least_squares: row counts differ");
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(to_eigen(a), Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(tol_rel);
    return from_eigen(svd.solve(to_eigen(b)));
}

/// Unit vector v minimizing ||M v||: the right singular vector of the
/// smallest singular value.
inline ComplexMatrix min_singular_vector(const ComplexMatrix& m) {
    if (m.empty())
        throw EmptyMatrixError("min_singular_vector of empty matrix");
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(to_eigen(m), Eigen::ComputeFullV);
    const Eigen::MatrixXcd v = svd.matrixV();
    return from_eigen(v.col(v.cols() - 1));
}

inline bool is_hermitian(const ComplexMatrix& m, double tol = 1e-12) {
    if (!m.square())
        return false;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i; j < m.cols(); ++j)
            if (std::abs(m(i, j) - std::conj(m(j, i))) > tol)
                return false;
    return true;
}

}  // namespace lpvcert
