#include "cvqst/fock.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <Eigen/Eigenvalues>

#include "cvqst/displacement.hpp"
#include "cvqst/truncation.hpp"

namespace cvqst {

int thread_count() {
    static const int n = [] {
        if (const char* env = std::getenv("CVQST_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }();
    return n;
}

void parallel_for(int n, const std::function<void(int)>& fn) {
    const int workers = std::min(thread_count(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            try {
                for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);  // drain remaining work
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

int HilbertConfig::total_dim() const {
    long long total = 1;
    for (int d : mode_dims) total *= d;
    return static_cast<int>(total);
}

void HilbertConfig::validate() const {
    if (mode_dims.empty()) throw InvalidDimension("HilbertConfig: no modes");
    for (int d : mode_dims) {
        if (d < 2) throw InvalidDimension("HilbertConfig: every mode_dim must be >= 2");
        if (compute_dim < d)
            throw InvalidDimension("HilbertConfig: compute_dim must be >= every mode_dim");
    }
    long long total = 1;
    for (int d : mode_dims) {
        total *= d;
        if (total * total > static_cast<long long>(max_matrix_entries))
            throw InvalidDimension(
                "HilbertConfig: total dimension squared exceeds the memory cap of " +
                std::to_string(max_matrix_entries) + " entries");
    }
}

DensityMatrix DensityMatrix::from(Matrix m) {
    DensityMatrix rho{std::move(m)};
    std::string why;
    if (!rho.is_physical(&why)) throw InvalidParameter("DensityMatrix: " + why);
    return rho;
}

DensityMatrix DensityMatrix::trusted(Matrix m) {
    DensityMatrix rho{std::move(m)};
#ifndef NDEBUG
    std::string why;
    if (!rho.is_physical(&why)) throw InvalidParameter("DensityMatrix(debug): " + why);
#endif
    return rho;
}

bool DensityMatrix::is_physical(std::string* why) const {
    if (mat.rows() != mat.cols() || mat.rows() < 1) {
        if (why) *why = "not square";
        return false;
    }
    const double herm_defect = (mat - mat.adjoint()).cwiseAbs().maxCoeff();
    if (herm_defect > 1e-10) {
        if (why) *why = "hermiticity defect " + std::to_string(herm_defect);
        return false;
    }
    const Complex tr = mat.trace();
    if (std::abs(tr - Complex(1.0, 0.0)) > 1e-8) {
        if (why) *why = "trace deviates from 1 by " + std::to_string(std::abs(tr - 1.0));
        return false;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(mat, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        if (why) *why = "eigensolver failed";
        return false;
    }
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < -1e-8) {
        if (why) *why = "min eigenvalue " + std::to_string(min_eig);
        return false;
    }
    return true;
}

Matrix annihilation(int dim) {
    if (dim < 2) throw InvalidDimension("annihilation: dim must be >= 2");
    Matrix a = Matrix::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(double(n));
    return a;
}

Matrix creation(int dim) { return annihilation(dim).adjoint(); }

Matrix number_operator(int dim) {
    if (dim < 1) throw InvalidDimension("number_operator: dim must be >= 1");
    Matrix n = Matrix::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) n(k, k) = double(k);
    return n;
}

Matrix parity(int dim) {
    if (dim < 1) throw InvalidDimension("parity: dim must be >= 1");
    Matrix p = Matrix::Zero(dim, dim);
    for (int n = 0; n < dim; ++n) p(n, n) = (n % 2 == 0) ? 1.0 : -1.0;
    return p;
}

Vector coherent_amps_unnormalized(Complex alpha, int dim) {
    if (dim < 1) throw InvalidDimension("coherent_amps_unnormalized: dim must be >= 1");
    Vector c(dim);
    c(0) = std::exp(-0.5 * std::norm(alpha));
    for (int n = 1; n < dim; ++n) c(n) = c(n - 1) * alpha / std::sqrt(double(n));
    return c;
}

PureState coherent_analytic(Complex alpha, int dim) {
    const Vector c = coherent_amps_unnormalized(alpha, dim);
    const double weight = c.squaredNorm();
    if (weight <= 0.0)
        throw NumericFailure("coherent_analytic: truncated weight underflowed to zero");
    PureState psi;
    psi.amps = c / std::sqrt(weight);
    psi.truncation_weight = weight;
    return psi;
}

PureState coherent_via_displacement(Complex alpha, int dim) {
    const DisplacementCache cache = build_cache(dim);
    Matrix d = displacement_fast(alpha, cache);
    PureState psi;
    psi.amps = d.col(0);
    psi.truncation_weight = psi.amps.squaredNorm();
    psi.amps.normalize();
    return psi;
}

PureState cat_state(Complex alpha, int dim) {
    const int needed = required_dimension(0, std::abs(alpha));
    if (dim < needed)
        throw InvalidDimension("cat_state: dim " + std::to_string(dim) +
                               " below required dimension " + std::to_string(needed));
    PureState plus = coherent_analytic(alpha, dim);
    PureState minus = coherent_analytic(-alpha, dim);
    PureState cat;
    cat.amps = plus.amps + minus.amps;
    cat.truncation_weight = 0.5 * (plus.truncation_weight + minus.truncation_weight);
    cat.amps.normalize();
    return cat;
}

PureState binomial_logical_zero(int dim) {
    if (dim < 5) throw InvalidDimension("binomial_logical_zero: dim must be >= 5");
    PureState psi;
    psi.amps = Vector::Zero(dim);
    psi.amps(0) = 1.0 / std::sqrt(2.0);
    psi.amps(4) = 1.0 / std::sqrt(2.0);
    return psi;
}

PureState binomial_logical_one(int dim) {
    if (dim < 5) throw InvalidDimension("binomial_logical_one: dim must be >= 5");
    PureState psi;
    psi.amps = Vector::Zero(dim);
    psi.amps(2) = 1.0;
    return psi;
}

PureState logical_bell(int dim_per_mode) {
    PureState zero = binomial_logical_zero(dim_per_mode);
    PureState one = binomial_logical_one(dim_per_mode);
    PureState bell;
    bell.amps = (kron_vec(zero.amps, one.amps) + kron_vec(one.amps, zero.amps)) /
                std::sqrt(2.0);
    return bell;
}

PureState w_state(int num_modes) {
    if (num_modes < 2) throw InvalidDimension("w_state: num_modes must be >= 2");
    const long long dim = 1LL << num_modes;
    PureState psi;
    psi.amps = Vector::Zero(dim);
    const double amp = 1.0 / std::sqrt(double(num_modes));
    // modes ordered outer-to-inner: excitation in mode i sits at bit m-1-i
    for (int i = 0; i < num_modes; ++i)
        psi.amps(1LL << (num_modes - 1 - i)) = amp;
    return psi;
}

double thermal_weight(double nbar, int dim) {
    if (nbar < 0.0) throw InvalidParameter("thermal_weight: nbar must be >= 0");
    if (dim < 1) throw InvalidDimension("thermal_weight: dim must be >= 1");
    if (nbar == 0.0) return 1.0;
    const double q = nbar / (1.0 + nbar);
    double w = 0.0, p = 1.0 / (1.0 + nbar);
    for (int n = 0; n < dim; ++n, p *= q) w += p;
    return w;
}

DensityMatrix thermal_state(double nbar, int dim) {
    if (nbar < 0.0) throw InvalidParameter("thermal_state: nbar must be >= 0");
    if (dim < 2) throw InvalidDimension("thermal_state: dim must be >= 2");
    Matrix rho = Matrix::Zero(dim, dim);
    if (nbar == 0.0) {
        rho(0, 0) = 1.0;
        return DensityMatrix::trusted(std::move(rho));
    }
    const double q = nbar / (1.0 + nbar);
    double p = 1.0;
    for (int n = 0; n < dim; ++n, p *= q) rho(n, n) = p;
    rho /= rho.trace();
    return DensityMatrix::trusted(std::move(rho));
}

Matrix kron(const Matrix& a, const Matrix& b) {
    const Eigen::Index ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
    Matrix out(ar * br, ac * bc);
    for (Eigen::Index i = 0; i < ar; ++i)
        for (Eigen::Index j = 0; j < ac; ++j)
            out.block(i * br, j * bc, br, bc) = a(i, j) * b;
    return out;
}

Matrix kron_all(const std::vector<Matrix>& ops) {
    if (ops.empty()) throw InvalidInput("kron_all: empty operand list");
    Matrix out = ops.front();
    for (std::size_t i = 1; i < ops.size(); ++i) out = kron(out, ops[i]);
    return out;
}

Vector kron_vec(const Vector& a, const Vector& b) {
    Vector out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
        out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

Vector kron_vec_all(const std::vector<Vector>& vecs) {
    if (vecs.empty()) throw InvalidInput("kron_vec_all: empty operand list");
    Vector out = vecs.front();
    for (std::size_t i = 1; i < vecs.size(); ++i) out = kron_vec(out, vecs[i]);
    return out;
}

double fidelity(const Matrix& rho, const Vector& target) {
    if (rho.rows() != target.size())
        throw InvalidDimension("fidelity: dimension mismatch");
    const double f = std::real(target.dot(rho * target));
    return std::clamp(f, 0.0, 1.0);
}

double fidelity(const DensityMatrix& rho, const PureState& target) {
    return fidelity(rho.mat, target.amps);
}

}  // namespace cvqst
