#ifndef CVQST_SAMPLER_HPP
#define CVQST_SAMPLER_HPP

#include "cvqst/measurement.hpp"

namespace cvqst {

/// Random-walk Metropolis configuration. proposal_sigma <= 0 selects the
/// default 0.5 * sqrt(nbar_max + 1).
struct McmcConfig {
    long long n_samples = 0;
    long long burn_in = 2000;
    int thinning = 5;
    double proposal_sigma = 0.0;
    std::uint64_t seed = 0;
    int n_chains = 4;

    void validate() const;
};

/// Draws heterodyne outcome tuples from Q(alpha) = Tr(rho_sys Pi(alpha)),
/// with Pi taken from the measurement config (noiseless or thermal-noise
/// POVMs). Chains run independently from per-chain derived seeds and are
/// concatenated in chain order, so the output is reproducible for a fixed
/// (config, seed) at any thread count.
SampleSet sample_q(const DensityMatrix& rho_sys, const MeasurementConfig& config,
                   const McmcConfig& mcmc);

struct ChainDiagnostics {
    std::vector<double> acceptance_rates;
    /// Per-coordinate between/within-chain variance ratio (split-free PSRF);
    /// ~1 for well-mixed chains. Empty when fewer than two chains.
    std::vector<double> variance_ratios;
    bool acceptance_warning = false;
    bool mixing_warning = false;
};

ChainDiagnostics chain_diagnostics(const SampleSet& samples);

}  // namespace cvqst

#endif
