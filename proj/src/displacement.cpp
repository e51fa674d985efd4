#include "cvqst/displacement.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "cvqst/fock.hpp"

namespace cvqst {

namespace {

// Gauge diagonal as a vector: ((-i e^{-i theta})^n), n = 0..dim-1.
Vector gauge_diag(double theta, int dim) {
    Vector k(dim);
    const Complex step = Complex(0.0, -1.0) * std::exp(Complex(0.0, -theta));
    Complex acc = 1.0;
    for (int n = 0; n < dim; ++n, acc *= step) k(n) = acc;
    return k;
}

}  // namespace

Matrix displacement_reference(Complex alpha, int dim) {
    if (dim < 2) throw InvalidDimension("displacement_reference: dim must be >= 2");
    const Matrix a = annihilation(dim);
    const Matrix gen = alpha * a.adjoint() - std::conj(alpha) * a;
    return gen.exp();
}

DisplacementCache build_cache(int dim) {
    if (dim < 2) throw InvalidDimension("build_cache: dim must be >= 2");
    RealMatrix x = RealMatrix::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) {
        const double s = std::sqrt(double(n));
        x(n - 1, n) = s;
        x(n, n - 1) = s;
    }
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(x);
    if (es.info() != Eigen::Success)
        throw NumericFailure("build_cache: eigensolver failed at dim " +
                             std::to_string(dim));
    DisplacementCache cache;
    cache.dim = dim;
    cache.eigvecs = es.eigenvectors().cast<Complex>();
    cache.eigvals = es.eigenvalues();
    return cache;
}

Matrix phase_gauge(double theta, int dim) {
    if (dim < 1) throw InvalidDimension("phase_gauge: dim must be >= 1");
    return gauge_diag(theta, dim).asDiagonal();
}

Matrix displacement_fast(Complex alpha, const DisplacementCache& cache) {
    const int dim = cache.dim;
    if (std::abs(alpha) < 1e-14) return Matrix::Identity(dim, dim);
    const auto [r, theta] = PolarAmplitude::from(alpha);

    Vector phase(dim);
    for (int n = 0; n < dim; ++n)
        phase(n) = std::exp(Complex(0.0, -r * cache.eigvals(n)));

    // One dense product per alpha: (V e^{-ir Lambda}) V^dag, then the diagonal
    // gauge applied to rows and columns.
    Matrix core = (cache.eigvecs * phase.asDiagonal()) * cache.eigvecs.adjoint();
    const Vector k = gauge_diag(theta, dim);
    return k.conjugate().asDiagonal() * core * k.asDiagonal();
}

Matrix displacement_top_rows(Complex alpha, int nrows, const DisplacementCache& cache) {
    const int dim = cache.dim;
    if (nrows < 1 || nrows > dim)
        throw InvalidDimension("displacement_top_rows: bad row count");
    if (std::abs(alpha) < 1e-14)
        return Matrix::Identity(dim, dim).topRows(nrows);
    const auto [r, theta] = PolarAmplitude::from(alpha);

    Vector phase(dim);
    for (int n = 0; n < dim; ++n)
        phase(n) = std::exp(Complex(0.0, -r * cache.eigvals(n)));

    const Vector k = gauge_diag(theta, dim);
    Matrix top = cache.eigvecs.topRows(nrows);
    for (int i = 0; i < nrows; ++i) top.row(i) *= std::conj(k(i));
    Matrix rows = (top * phase.asDiagonal()) * cache.eigvecs.adjoint();
    for (int j = 0; j < dim; ++j) rows.col(j) *= k(j);
    return rows;
}

std::vector<Matrix> displacement_batch(const std::vector<Complex>& alphas,
                                       const DisplacementCache& cache) {
    if (alphas.empty()) throw InvalidInput("displacement_batch: empty batch");
    std::vector<Matrix> out(alphas.size());
    parallel_for(static_cast<int>(alphas.size()),
                 [&](int i) { out[i] = displacement_fast(alphas[i], cache); });
    return out;
}

std::vector<BenchRow> benchmark_displacement(const std::vector<int>& dims,
                                             int batch_size, std::uint64_t seed) {
    using clock = std::chrono::steady_clock;
    std::vector<BenchRow> rows;
    for (int dim : dims) {
        std::mt19937_64 rng(derive_seed(seed, dim));
        std::uniform_real_distribution<double> mag(0.0, 6.0), ang(0.0, 2.0 * kPi);
        std::vector<Complex> alphas(batch_size);
        for (auto& a : alphas) a = std::polar(mag(rng), ang(rng));

        const auto t0 = clock::now();
        const DisplacementCache cache = build_cache(dim);
        auto fast = displacement_batch(alphas, cache);
        const auto t1 = clock::now();
        Complex sink = 0.0;
        for (const auto& d : fast) sink += d(0, 0);

        const auto t2 = clock::now();
        for (const auto& a : alphas) {
            Matrix d = displacement_reference(a, dim);
            sink += d(0, 0);
        }
        const auto t3 = clock::now();

        BenchRow row;
        row.dim = dim;
        row.batch_size = batch_size;
        row.fast_seconds = std::chrono::duration<double>(t1 - t0).count();
        row.reference_seconds = std::chrono::duration<double>(t3 - t2).count();
        row.speedup = row.reference_seconds / std::max(row.fast_seconds, 1e-12);
        if (!std::isfinite(std::abs(sink)))
            throw NumericFailure("benchmark_displacement: non-finite results");
        rows.push_back(row);
    }
    return rows;
}

}  // namespace cvqst
