#pragma once

#include <lpvcert/linalg.hpp>
#include <lpvcert/pbh.hpp>
#include <lpvcert/rng.hpp>
#include <lpvcert/system_model.hpp>

namespace testing_helpers {

using namespace lpvcert;

/// Constant (parameter-free) system without uncertainty structure.
inline LpvSystem fixed_system(ComplexMatrix a, ComplexMatrix b, ComplexMatrix c, ComplexMatrix d) {
    LpvSystem sys;
    sys.n = a.rows();
    sys.m = b.cols();
    sys.p = c.rows();
    sys.famA = AffineMatrixFamily::constant(std::move(a));
    sys.famB = AffineMatrixFamily::constant(std::move(b));
    sys.famC = AffineMatrixFamily::constant(std::move(c));
    sys.famD = AffineMatrixFamily::constant(std::move(d));
    return sys;
}

inline LpvSystem fixed_system(const ComplexMatrix& a, const ComplexMatrix& b) {
    const std::size_t n = a.rows();
    return fixed_system(a, b, ComplexMatrix::identity(n), ComplexMatrix::zero(n, b.cols()));
}

/// Unstructured (fully free) uncertainty on the given channel: one block with
/// identity scaling factors.
inline void add_full_structure(LpvSystem& sys, Channel ch) {
    auto& cp = sys.pert.channel(ch);
    cp.right = ComplexMatrix::identity(sys.channel_cols(ch));
    cp.blocks = {{0, ComplexMatrix::identity(sys.channel_rows(ch))}};
}

inline ParameterPoint empty_point() { return {}; }

/// Kalman rank oracle: rank [B, AB, ..., A^{n-1}B] == n.
inline bool kalman_controllable(const ComplexMatrix& a, const ComplexMatrix& b, double tol = kDefaultTol) {
    const std::size_t n = a.rows();
    ComplexMatrix block = b;
    ComplexMatrix kal = b;
    for (std::size_t k = 1; k < n; ++k) {
        block = a * block;
        kal = hcat(kal, block);
    }
    return numerical_rank(kal, tol) == n;
}

/// Margin of the Kalman matrix's rank decision, for guard-band filtering.
inline double kalman_margin(const ComplexMatrix& a, const ComplexMatrix& b, double tol = kDefaultTol) {
    const std::size_t n = a.rows();
    ComplexMatrix block = b;
    ComplexMatrix kal = b;
    for (std::size_t k = 1; k < n; ++k) {
        block = a * block;
        kal = hcat(kal, block);
    }
    const auto sv = singular_values(kal);
    const double thr = rank_threshold(sv.front(), tol);
    return sv.at(n - 1) / thr;
}

inline ComplexMatrix random_unitary(std::size_t n, Rng& rng) {
    // Twice-through Gram-Schmidt on a random complex matrix.
    ComplexMatrix g = rng.matrix(n, n, -1.0, 1.0, true);
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = 0; k < j; ++k) {
                cplx dot{};
                for (std::size_t i = 0; i < n; ++i) dot += std::conj(g(i, k)) * g(i, j);
                for (std::size_t i = 0; i < n; ++i) g(i, j) -= dot * g(i, k);
            }
            double norm = 0.0;
            for (std::size_t i = 0; i < n; ++i) norm += std::norm(g(i, j));
            norm = std::sqrt(norm);
            for (std::size_t i = 0; i < n; ++i) g(i, j) /= norm;
        }
    }
    return g;
}

}  // namespace testing_helpers
