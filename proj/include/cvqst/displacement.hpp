#ifndef CVQST_DISPLACEMENT_HPP
#define CVQST_DISPLACEMENT_HPP

#include <vector>

#include "cvqst/common.hpp"

namespace cvqst {

/// Spectral factorization of the truncated position-like operator a + a^dag.
/// Built once per dimension and reused for every displacement amplitude:
/// D(alpha) = K(theta)^dag V exp(-i r Lambda) V^dag K(theta) with alpha =
/// r e^{i theta}, so each new alpha costs one dense matrix product.
struct DisplacementCache {
    int dim = 0;
    Matrix eigvecs;        // V, columns orthonormal
    RealVector eigvals;    // Lambda, ascending
};

struct PolarAmplitude {
    double r = 0.0;
    double theta = 0.0;

    static PolarAmplitude from(Complex alpha) {
        return {std::abs(alpha), std::arg(alpha)};
    }
};

/// Dense matrix exponential of the truncated generator alpha a^dag - alpha^* a
/// (scaling-and-squaring Pade kernel). Serves as the oracle for the fast path.
Matrix displacement_reference(Complex alpha, int dim);

/// Eigendecomposition of the real symmetric tridiagonal a + a^dag at dim.
DisplacementCache build_cache(int dim);

/// Diagonal gauge K(theta) = diag((-i e^{-i theta})^n).
Matrix phase_gauge(double theta, int dim);

/// Fast displacement via the shared-eigenvector similarity of tridiagonal
/// matrices. Returns the identity directly for |alpha| < 1e-14, where the
/// polar angle (and the gauge) is undefined.
Matrix displacement_fast(Complex alpha, const DisplacementCache& cache);

/// Batch of displacements sharing one cache. Output order matches input;
/// entries may be computed in parallel.
std::vector<Matrix> displacement_batch(const std::vector<Complex>& alphas,
                                       const DisplacementCache& cache);

/// Top `nrows` rows of displacement_fast(alpha, cache), computed without
/// materializing the full matrix: the slice is all Eq.-style truncated POVM
/// synthesis needs, at O(nrows * dim^2) instead of O(dim^3).
Matrix displacement_top_rows(Complex alpha, int nrows, const DisplacementCache& cache);

struct BenchRow {
    int dim = 0;
    int batch_size = 0;
    double reference_seconds = 0.0;
    double fast_seconds = 0.0;
    double speedup = 0.0;
};

/// Times reference vs fast paths over a seeded random batch at each dim.
std::vector<BenchRow> benchmark_displacement(const std::vector<int>& dims,
                                             int batch_size, std::uint64_t seed);

}  // namespace cvqst

#endif
