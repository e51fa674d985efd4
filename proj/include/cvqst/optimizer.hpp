#ifndef CVQST_OPTIMIZER_HPP
#define CVQST_OPTIMIZER_HPP

#include "cvqst/measurement.hpp"

namespace cvqst {

enum class StepRule { FixedLipschitz, Backtracking };
enum class Algorithm { Pgd, Ssg, AssgR };

struct SolverConfig {
    double eta0 = 0.1;       // initial stochastic learning rate
    int outer_iters = 10;    // E: outer rounds (learning rate halves per round)
    int inner_iters = 100;   // B: projected steps per round
    int batch_size = 512;
    std::uint64_t seed = 0;
    StepRule step_rule = StepRule::FixedLipschitz;
    Algorithm algorithm = Algorithm::Pgd;

    int max_iters = 2000;    // deterministic PGD iteration cap
    double rel_tol = 1e-10;  // PGD relative objective-decrease stop
    /// Momentum extrapolation with restart for the deterministic LS solver
    /// (monotone safeguard keeps the objective trace non-increasing). The
    /// plain projected step remains the default.
    bool momentum = false;

    void validate() const;
};

struct IterationRecord {
    long long iter = 0;
    double objective = 0.0;  // NaN when not evaluated (initial record)
    double fidelity = -1.0;  // -1 when no reference target was supplied
    double seconds = 0.0;
};

struct SolverReport {
    DensityMatrix rho_final{Matrix()};
    std::vector<IterationRecord> trace;
    std::string termination;
    long long clamp_events = 0;
    double lipschitz_step = 0.0;   // PGD only: the step size actually used
    double final_fidelity = -1.0;  // fidelity of rho_final when a target was given
    double total_seconds = 0.0;
    SolverConfig config;

    double max_fidelity() const;
};

// --- projections -------------------------------------------------------------

/// Euclidean projection onto the probability simplex {w >= 0, sum w = 1}
/// via the sort-and-threshold closed form.
RealVector simplex_project(const RealVector& v);
std::vector<double> simplex_project(const std::vector<double>& v);

/// Frobenius-nearest density matrix: hermitize, eigendecompose, project the
/// spectrum onto the simplex, reassemble.
DensityMatrix project_density(const Matrix& hermitian);

// --- objectives ----------------------------------------------------------------

/// Mean negative log-likelihood over a POVM batch, with Tr(rho Pi) clamped at
/// 1e-300 before the logarithm; clamp events are accumulated into *clamps.
double nll_objective(const Matrix& rho, const std::vector<Matrix>& povms,
                     long long* clamps = nullptr);

/// Conjugate-Wirtinger NLL gradient: -(1/B) sum Pi_j / Tr(rho Pi_j), Hermitian
/// by construction. Optionally returns the batch objective evaluated on the
/// same pass.
Matrix nll_gradient(const Matrix& rho, const std::vector<Matrix>& povms,
                    double* objective = nullptr, long long* clamps = nullptr);

/// ||A vec(rho) - b||^2 and (optionally) its gradient 2 herm(unvec(A^dag r)).
double ls_objective(const DesignSystem& system, const Matrix& rho,
                    Matrix* gradient = nullptr);

/// Gradient over a row subset, scaled by rows/|subset| to estimate the
/// full-sum gradient; objective gets the same scaling.
Matrix ls_batch_gradient(const DesignSystem& system, const Matrix& rho,
                         const std::vector<int>& indices,
                         double* objective = nullptr);

// --- solvers -------------------------------------------------------------------

/// Projected gradient descent for min ||A vec(rho) - b||^2 over the density
/// matrix set. Fixed step 1/(2 sigma_max(A)^2) or Armijo halving
/// backtracking; initialized at the maximally mixed state unless rho0 given.
SolverReport pgd_least_squares(const DesignSystem& system, const SolverConfig& config,
                               const PureState* fidelity_target = nullptr,
                               const Matrix* rho0 = nullptr);

/// Builds mini-batch POVMs for the stochastic MLE solvers. force_dense
/// disables the rank-one representation of noiseless POVMs (testing hook).
struct PovmFactory {
    MeasurementConfig config;
    bool force_dense = false;

    BatchPovms operator()(const SampleSet& samples,
                          const std::vector<int>& indices) const {
        return make_batch_povms(samples, indices, config, force_dense);
    }
};

/// Stochastic subgradient MLE: E rounds of B projected steps on shuffled
/// mini-batches; each round ends by averaging its inner iterates and halving
/// the learning rate.
SolverReport ssg_solve(const SampleSet& samples, const PovmFactory& factory,
                       const SolverConfig& config,
                       const PureState* fidelity_target = nullptr);

/// Accelerated variant with the same restart/averaging shell: each round runs
/// a two-sequence accelerated scheme (sliding projected-gradient sequence
/// started at the round anchor, tau-weighted aggregate as the iterate), then
/// averages and halves the learning rate like SSG.
SolverReport assg_r_solve(const SampleSet& samples, const PovmFactory& factory,
                          const SolverConfig& config,
                          const PureState* fidelity_target = nullptr);

/// SSG/ASSG-r loop over uniformly sampled design-system rows, with the
/// mini-batch least-squares gradient scaled to estimate the full-sum gradient.
SolverReport stochastic_least_squares(const DesignSystem& system,
                                      const SolverConfig& config,
                                      const PureState* fidelity_target = nullptr);

}  // namespace cvqst

#endif
