#ifndef CVQST_MEASUREMENT_HPP
#define CVQST_MEASUREMENT_HPP

#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "cvqst/fock.hpp"
#include "cvqst/truncation.hpp"

namespace cvqst {

/// Uniform phase-space lattice per mode: points^2 square cells covering
/// [-alpha_max, alpha_max]^2, addressed by cell centers.
struct PhaseSpaceGrid {
    struct Axis {
        double alpha_max = 0.0;
        int points = 0;
    };
    std::vector<Axis> modes;

    static PhaseSpaceGrid uniform(int num_modes, double alpha_max, int points);

    int num_modes() const { return static_cast<int>(modes.size()); }
    void validate() const;

    double cell_step(int mode) const;
    double cell_area(int mode) const;
    /// Product of per-mode cell areas; the 2m-dimensional cell volume.
    double cell_volume() const;
    long long cells_per_mode(int mode) const;
    long long total_cells() const;

    /// Axis cell centers, ascending.
    std::vector<double> axis(int mode) const;

    /// Cell centers for a global cell index. Iteration order: modes
    /// outer-to-inner, and per mode x-major (x outer, p inner).
    std::vector<Complex> cell_alphas(long long global_index) const;

    /// Maps a sample tuple to its cell; false when any coordinate is outside
    /// the lattice.
    bool locate(const Complex* point, long long* global_index) const;
};

/// Resolved measurement model: per-mode reconstruction dims k1, synthesis
/// dimension k2, per-mode noise photon numbers, plus the displacement cache
/// and thermal noise states shared by every POVM built from this config.
struct MeasurementConfig {
    std::vector<int> mode_dims;
    int compute_dim = 0;
    std::vector<double> nbar;

    std::shared_ptr<const DisplacementCache> cache;
    std::vector<Matrix> rho_h;  // thermal states at compute_dim, per mode
    std::shared_ptr<std::atomic<long long>> under_truncation_events;

    static MeasurementConfig make(std::vector<int> mode_dims, int compute_dim,
                                  std::vector<double> nbar = {});

    int modes() const { return static_cast<int>(mode_dims.size()); }
    int total_dim() const;
    bool noiseless() const;
};

enum class MeasurementKind { QNoiseless, QNoisy, Wigner };

/// Heterodyne POVM element: (1/pi)|alpha><alpha| truncated (noiseless) or
/// (1/pi) D(alpha) rho_h D^dag(alpha) truncated (noisy), per mode; modes
/// combine by Kronecker product.
Matrix q_povm(const std::vector<Complex>& alphas, const MeasurementConfig& config);
Matrix q_povm(Complex alpha, const MeasurementConfig& config);

/// Single-mode factor of the multimode Q POVM, including its 1/pi prefactor.
Matrix q_povm_mode_core(Complex alpha, int mode, const MeasurementConfig& config);

/// Displaced-parity POVM element (2/pi) [D(alpha) P D^dag(alpha)]_{k1} per
/// mode. Hermitian with eigenvalues in [-2/pi, 2/pi]; not PSD.
Matrix wigner_povm(const std::vector<Complex>& alphas, const MeasurementConfig& config);
Matrix wigner_povm(Complex alpha, const MeasurementConfig& config);

/// For noiseless configs the multimode Q POVM is rank one:
/// Pi = (1/pi^m) c c^dag. Returns c (the Kronecker product of truncated
/// coherent vectors); prefactor returned separately.
Vector q_rank1_vector(const std::vector<Complex>& alphas,
                      const MeasurementConfig& config);

/// Tr(rho Pi); the imaginary residue (<= 1e-10 for Hermitian inputs) is
/// discarded.
double evaluate(const Matrix& rho, const Matrix& povm);

/// Stacked linear system A vec(rho) = b over grid cells.
struct DesignSystem {
    Matrix a;            // rows are vec(Pi^T)^T, one per grid cell
    RealVector b;
    MeasurementKind kind = MeasurementKind::QNoiseless;
    int total_dim = 0;

    long long rows() const { return a.rows(); }
};

/// Builds the design matrix over the grid (documented row order) and pairs it
/// with measured values. cell_subsamples > 1 replaces each row's POVM by its
/// cell average on an n x n Gauss-Legendre lattice; histogram-binned data
/// estimates exactly that average, so matching rows remove the binning bias
/// (per-mode averages Kronecker-combine exactly).
DesignSystem build_design_system(const PhaseSpaceGrid& grid,
                                 const std::vector<double>& values,
                                 MeasurementKind kind,
                                 const MeasurementConfig& config,
                                 int cell_subsamples = 1);

/// POVM for one grid cell under the given measurement kind; row builder for
/// spot checks against the assembled system.
Matrix design_povm(const std::vector<Complex>& alphas, MeasurementKind kind,
                   const MeasurementConfig& config);

/// Tr(rho Pi(alpha)) over every grid cell, in grid order.
std::vector<double> evaluate_grid(const Matrix& rho, const PhaseSpaceGrid& grid,
                                  MeasurementKind kind,
                                  const MeasurementConfig& config);

// --- samples ---------------------------------------------------------------

struct SamplerDiagnostics {
    std::vector<double> acceptance_rates;   // per chain
    std::vector<long long> chain_lengths;   // kept samples per chain
    long long start_resamples = 0;
};

/// Heterodyne outcome dataset: flat sample-major storage of m-tuples.
struct SampleSet {
    int modes = 0;
    std::vector<Complex> data;

    std::string state_hash;
    std::vector<double> nbar;
    std::uint64_t seed = 0;
    long long burn_in = 0;
    int thinning = 1;
    double proposal_sigma = 0.0;
    SamplerDiagnostics diagnostics;

    long long size() const { return modes == 0 ? 0 : static_cast<long long>(data.size()) / modes; }
    const Complex* sample(long long i) const { return data.data() + i * modes; }
};

/// Out-of-range handling for histogram binning. Exclude drops out-of-range
/// samples from the bins but keeps them in the denominator (sum of
/// Qhat * cell_volume = in-range fraction); Renormalize divides by the
/// in-range count instead.
enum class DropPolicy { Exclude, Renormalize };

struct Histogram {
    std::vector<double> values;  // grid iteration order
    long long total_samples = 0;
    long long out_of_range = 0;
    DropPolicy policy = DropPolicy::Exclude;
};

Histogram histogram_q(const SampleSet& samples, const PhaseSpaceGrid& grid,
                      DropPolicy policy = DropPolicy::Exclude);

/// Seeded i.i.d. zero-mean Gaussian perturbation of measured values.
std::vector<double> add_gaussian_noise(const std::vector<double>& values,
                                       double sigma, std::uint64_t seed);

// --- batch POVMs for sample-based MLE ---------------------------------------

/// POVMs for a mini-batch of samples. Noiseless configs produce the rank-one
/// coherent factors (columns of `rank1`); noisy configs produce dense
/// matrices via the factorized truncated construction.
struct BatchPovms {
    bool is_rank1 = false;
    std::vector<Matrix> dense;
    Matrix rank1;             // d x batch, Pi_j = prefactor * c_j c_j^dag
    double rank1_prefactor = 1.0;
};

BatchPovms make_batch_povms(const SampleSet& samples,
                            const std::vector<int>& indices,
                            const MeasurementConfig& config,
                            bool force_dense = false);

}  // namespace cvqst

#endif
