#ifndef CVQST_FOCK_HPP
#define CVQST_FOCK_HPP

#include <vector>

#include "cvqst/common.hpp"

namespace cvqst {

/// Truncated Hilbert-space layout: per-mode reconstruction dimension k1 and
/// the higher dimension k2 used for operator synthesis.
struct HilbertConfig {
    std::vector<int> mode_dims;           // k1 per mode, each >= 2
    int compute_dim = 0;                  // k2 >= max(mode_dims)
    std::size_t max_matrix_entries = std::size_t(1) << 24;  // cap on total^2

    int total_dim() const;
    void validate() const;
};

/// Hermitian, PSD, unit-trace matrix. `from` validates; `trusted` skips the
/// eigenvalue check for matrices feasible by construction (solver iterates).
struct DensityMatrix {
    Matrix mat;

    int dim() const { return static_cast<int>(mat.rows()); }

    static DensityMatrix from(Matrix m);
    static DensityMatrix trusted(Matrix m);

    /// Invariant check: hermiticity 1e-10, |trace-1| <= 1e-8, min eig >= -1e-8.
    bool is_physical(std::string* why = nullptr) const;
};

/// Normalized state vector. truncation_weight records the pre-normalization
/// probability captured by the truncated expansion (1 for exact constructions).
struct PureState {
    Vector amps;
    double truncation_weight = 1.0;

    int dim() const { return static_cast<int>(amps.size()); }
};

// --- canonical operators -------------------------------------------------

/// Annihilation operator: <n-1|a|n> = sqrt(n) on the superdiagonal.
Matrix annihilation(int dim);
Matrix creation(int dim);
Matrix number_operator(int dim);

/// Parity exp(i*pi*a^dag*a) = diag((-1)^n).
Matrix parity(int dim);

// --- states ---------------------------------------------------------------

/// Coherent state from the analytic expansion c_n = e^{-|a|^2/2} a^n/sqrt(n!),
/// evaluated by the recurrence c_n = c_{n-1} a / sqrt(n) and renormalized.
PureState coherent_analytic(Complex alpha, int dim);

/// Exact overlaps <n|alpha> for n < dim, without renormalization: the
/// projection of the true coherent state onto the truncated space. Decays
/// like a Gaussian in |alpha| (underflowing to zero rather than throwing),
/// which is what sampling targets need.
Vector coherent_amps_unnormalized(Complex alpha, int dim);

/// Coherent state as column 0 of the truncated displacement operator.
PureState coherent_via_displacement(Complex alpha, int dim);

/// Even cat state ~ |alpha> + |-alpha>. Requires dim >= required dimension
/// for displacements of magnitude |alpha| (see truncation module).
PureState cat_state(Complex alpha, int dim);

/// Binomial code words |0_L> = (|0>+|4>)/sqrt(2), |1_L> = |2>.
PureState binomial_logical_zero(int dim);
PureState binomial_logical_one(int dim);

/// (|0_L 1_L> + |1_L 0_L>)/sqrt(2) on two modes of dim_per_mode each.
PureState logical_bell(int dim_per_mode);

/// W state over num_modes two-level modes: (1/sqrt(m)) sum_i |0..1_i..0>.
PureState w_state(int num_modes);

/// Thermal state: diagonal populations ~ (nbar/(1+nbar))^n, renormalized to
/// unit trace inside the truncated space.
DensityMatrix thermal_state(double nbar, int dim);

/// Trace captured by the first `dim` thermal populations before renormalizing.
double thermal_weight(double nbar, int dim);

// --- algebra ----------------------------------------------------------------

Matrix kron(const Matrix& a, const Matrix& b);
Matrix kron_all(const std::vector<Matrix>& ops);
Vector kron_vec(const Vector& a, const Vector& b);
Vector kron_vec_all(const std::vector<Vector>& vecs);

/// <psi|rho|psi> for a pure target, clamped to [0,1] against roundoff.
double fidelity(const DensityMatrix& rho, const PureState& target);
double fidelity(const Matrix& rho, const Vector& target);

}  // namespace cvqst

#endif
