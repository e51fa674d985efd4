#include "cvqst/truncation.hpp"

#include <cmath>

#include "cvqst/fock.hpp"

namespace cvqst {

Matrix project_operator(const Matrix& op, int to_dim) {
    if (to_dim < 1 || to_dim > op.rows() || op.rows() != op.cols())
        throw InvalidDimension("project_operator: to_dim exceeds operator dimension");
    return op.topLeftCorner(to_dim, to_dim);
}

Matrix embed_operator(const Matrix& op, int to_dim) {
    if (op.rows() != op.cols() || to_dim < op.rows())
        throw InvalidDimension("embed_operator: target dimension too small");
    Matrix out = Matrix::Zero(to_dim, to_dim);
    out.topLeftCorner(op.rows(), op.cols()) = op;
    return out;
}

Matrix truncated_noisy_povm(Complex alpha, const Matrix& rho_h, int k1, int k2,
                            const DisplacementCache& cache) {
    if (k1 < 1 || k1 > k2) throw InvalidDimension("truncated_noisy_povm: need 1 <= k1 <= k2");
    if (cache.dim != k2)
        throw InvalidDimension("truncated_noisy_povm: cache dimension != k2");
    if (rho_h.rows() < k2)
        throw InvalidDimension("truncated_noisy_povm: rho_h must be given at dimension >= k2");

    // [D rho_h D^dag]_{k1} = B rho_h B^dag with B the top k1 rows of D at k2.
    const Matrix b = displacement_top_rows(alpha, k1, cache);
    const Matrix noise = rho_h.rows() == k2 ? rho_h : project_operator(rho_h, k2);
    Matrix core = b * noise * b.adjoint();
    core = (core + core.adjoint().eval()) / 2.0;
    return core / kPi;
}

Matrix multimode_noisy_povm(const std::vector<Complex>& alphas,
                            const std::vector<Matrix>& rho_h_modes,
                            const std::vector<int>& k1_modes, int k2,
                            const DisplacementCache& cache) {
    if (alphas.empty() || alphas.size() != rho_h_modes.size() ||
        alphas.size() != k1_modes.size())
        throw InvalidParameter("multimode_noisy_povm: mode count mismatch");
    std::vector<Matrix> cores;
    cores.reserve(alphas.size());
    for (std::size_t m = 0; m < alphas.size(); ++m)
        cores.push_back(
            truncated_noisy_povm(alphas[m], rho_h_modes[m], k1_modes[m], k2, cache));
    return kron_all(cores);
}

int required_dimension(int n, double alpha_max) {
    if (n < 0 || alpha_max < 0.0)
        throw InvalidParameter("required_dimension: inputs must be nonnegative");
    const double level =
        n + alpha_max * alpha_max + 3.0 * std::sqrt(2.0 * n + 1.0) * alpha_max;
    return static_cast<int>(std::ceil(level)) + 1;
}

}  // namespace cvqst
