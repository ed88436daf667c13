#pragma once

#include <cstdint>

#include "lpvcert/complex_matrix.hpp"

namespace lpvcert {

/// SplitMix64 generator. Deterministic across platforms, which keeps seeded
/// reports byte-identical.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0x9e3779b97f4a7c15ull) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    cplx complex_uniform(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi)}; }

    ComplexMatrix matrix(std::size_t rows, std::size_t cols, double lo, double hi, bool complex_entries) {
        ComplexMatrix m(rows, cols);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
                m(i, j) = complex_entries ? complex_uniform(lo, hi) : cplx{uniform(lo, hi), 0.0};
        return m;
    }

private:
    std::uint64_t state_;
};

}  // namespace lpvcert
