#include "cvqst/sampler.hpp"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

namespace cvqst {

void McmcConfig::validate() const {
    if (n_samples < 1) throw InvalidParameter("McmcConfig: n_samples must be positive");
    if (burn_in < 0) throw InvalidParameter("McmcConfig: burn_in must be >= 0");
    if (thinning < 1) throw InvalidParameter("McmcConfig: thinning must be positive");
    if (n_chains < 1) throw InvalidParameter("McmcConfig: n_chains must be positive");
}

namespace {

/// Target density evaluator. rho_sys is factored once into its nonzero
/// eigenpairs so each Q evaluation costs O(rank * d) on top of the per-mode
/// POVM cores.
class QDensity {
  public:
    QDensity(const DensityMatrix& rho, const MeasurementConfig& cfg) : cfg_(cfg) {
        if (rho.dim() != cfg.total_dim())
            throw InvalidDimension("sample_q: rho_sys dimension != config dimension");
        Eigen::SelfAdjointEigenSolver<Matrix> es(rho.mat);
        if (es.info() != Eigen::Success)
            throw NumericFailure("sample_q: eigendecomposition of rho_sys failed");
        for (int i = 0; i < rho.dim(); ++i) {
            if (es.eigenvalues()(i) > 1e-12) {
                lambdas_.push_back(es.eigenvalues()(i));
                vecs_.push_back(es.eigenvectors().col(i));
            }
        }
        prefactor_ = std::pow(1.0 / kPi, cfg.modes());
    }

    double operator()(const std::vector<Complex>& alphas) const {
        double q = 0.0;
        if (cfg_.noiseless()) {
            // Exact Q of states supported inside the mode dims: build
            // P_{k1}|alpha> per mode from the unrenormalized overlaps. These
            // decay like exp(-|alpha|^2/2), so far-out proposals underflow to
            // zero density instead of hitting the truncation artifact of the
            // renormalized construction.
            std::vector<Vector> parts(cfg_.modes());
            for (int m = 0; m < cfg_.modes(); ++m)
                parts[m] = coherent_amps_unnormalized(alphas[m], cfg_.mode_dims[m]);
            const Vector c = kron_vec_all(parts);
            for (std::size_t i = 0; i < lambdas_.size(); ++i)
                q += lambdas_[i] * std::norm(c.dot(vecs_[i]));
            return prefactor_ * q;
        }
        // Factorized noisy POVM applied mode-by-mode to each eigenvector.
        std::vector<Matrix> cores(cfg_.modes());
        for (int m = 0; m < cfg_.modes(); ++m)
            cores[m] = q_povm_mode_core(alphas[m], m, cfg_);
        for (std::size_t i = 0; i < lambdas_.size(); ++i) {
            Vector w = vecs_[i];
            for (int m = 0; m < cfg_.modes(); ++m)
                w = apply_mode(cores[m], w, m);
            q += lambdas_[i] * std::real(vecs_[i].dot(w));
        }
        return q;
    }

    /// Per-mode mean photon numbers of rho_sys, for start-point recovery.
    std::vector<double> mode_mean_photons() const {
        std::vector<double> mean(cfg_.modes(), 0.0);
        for (std::size_t i = 0; i < lambdas_.size(); ++i) {
            const Vector& v = vecs_[i];
            for (int m = 0; m < cfg_.modes(); ++m) {
                double n_exp = 0.0;
                for (int idx = 0; idx < v.size(); ++idx)
                    n_exp += std::norm(v(idx)) * mode_level(idx, m);
                mean[m] += lambdas_[i] * n_exp;
            }
        }
        return mean;
    }

  private:
    int mode_level(long long idx, int mode) const {
        for (int m = cfg_.modes() - 1; m > mode; --m) idx /= cfg_.mode_dims[m];
        return static_cast<int>(idx % cfg_.mode_dims[mode]);
    }

    Vector apply_mode(const Matrix& op, const Vector& v, int mode) const {
        const int k = cfg_.mode_dims[mode];
        long long right = 1;
        for (int m = mode + 1; m < cfg_.modes(); ++m) right *= cfg_.mode_dims[m];
        const long long left = v.size() / (right * k);
        Vector out(v.size());
        for (long long l = 0; l < left; ++l)
            for (long long r = 0; r < right; ++r) {
                for (int i = 0; i < k; ++i) {
                    Complex acc = 0.0;
                    for (int j = 0; j < k; ++j)
                        acc += op(i, j) * v((l * k + j) * right + r);
                    out((l * k + i) * right + r) = acc;
                }
            }
        return out;
    }

    const MeasurementConfig& cfg_;
    std::vector<double> lambdas_;
    std::vector<Vector> vecs_;
    double prefactor_ = 1.0;
};

struct ChainResult {
    std::vector<Complex> kept;
    double acceptance_rate = 0.0;
    long long start_resamples = 0;
};

ChainResult run_chain(const QDensity& density, const MeasurementConfig& cfg,
                      const McmcConfig& mc, double sigma,
                      const std::vector<double>& start_scales,
                      std::uint64_t chain_seed, long long n_keep) {
    const int m = cfg.modes();
    std::mt19937_64 rng(chain_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Complex> x(m, Complex(0.0, 0.0));
    double qx = density(x);
    ChainResult result;
    // Zero-density start: resample from a Gaussian wide enough to reach the
    // state's support.
    int retries = 0;
    while (qx <= 0.0) {
        if (++retries > 200)
            throw NumericFailure("sample_q: could not find a positive-density start");
        for (int mode = 0; mode < m; ++mode)
            x[mode] = Complex(start_scales[mode] * gauss(rng),
                              start_scales[mode] * gauss(rng));
        qx = density(x);
        ++result.start_resamples;
    }

    long long accepted = 0, proposed = 0;
    std::vector<Complex> y(m);
    auto step = [&] {
        for (int mode = 0; mode < m; ++mode)
            y[mode] = x[mode] + Complex(sigma * gauss(rng), sigma * gauss(rng));
        const double qy = density(y);
        ++proposed;
        if (qy > 0.0 && unit(rng) < qy / qx) {
            x = y;
            qx = qy;
            ++accepted;
        }
    };

    for (long long i = 0; i < mc.burn_in; ++i) step();
    result.kept.reserve(n_keep * m);
    for (long long s = 0; s < n_keep; ++s) {
        for (int t = 0; t < mc.thinning; ++t) step();
        result.kept.insert(result.kept.end(), x.begin(), x.end());
    }
    result.acceptance_rate =
        proposed == 0 ? 0.0 : static_cast<double>(accepted) / proposed;
    return result;
}

}  // namespace

SampleSet sample_q(const DensityMatrix& rho_sys, const MeasurementConfig& config,
                   const McmcConfig& mcmc) {
    mcmc.validate();
    const QDensity density(rho_sys, config);

    double nbar_max = 0.0;
    for (double n : config.nbar) nbar_max = std::max(nbar_max, n);
    const double sigma =
        mcmc.proposal_sigma > 0.0 ? mcmc.proposal_sigma : 0.5 * std::sqrt(nbar_max + 1.0);

    const auto mean_photons = density.mode_mean_photons();
    std::vector<double> start_scales(config.modes());
    for (int m = 0; m < config.modes(); ++m)
        start_scales[m] = std::sqrt(config.nbar[m] + mean_photons[m] + 1.0);

    const int chains = mcmc.n_chains;
    std::vector<long long> n_keep(chains, mcmc.n_samples / chains);
    for (int c = 0; c < mcmc.n_samples % chains; ++c) ++n_keep[c];

    std::vector<ChainResult> results(chains);
    parallel_for(chains, [&](int c) {
        results[c] = run_chain(density, config, mcmc, sigma, start_scales,
                               derive_seed(mcmc.seed, c), n_keep[c]);
    });

    SampleSet out;
    out.modes = config.modes();
    out.nbar = config.nbar;
    out.seed = mcmc.seed;
    out.burn_in = mcmc.burn_in;
    out.thinning = mcmc.thinning;
    out.proposal_sigma = sigma;
    for (int c = 0; c < chains; ++c) {
        out.data.insert(out.data.end(), results[c].kept.begin(), results[c].kept.end());
        out.diagnostics.acceptance_rates.push_back(results[c].acceptance_rate);
        out.diagnostics.chain_lengths.push_back(n_keep[c]);
        out.diagnostics.start_resamples += results[c].start_resamples;
    }
    return out;
}

ChainDiagnostics chain_diagnostics(const SampleSet& samples) {
    ChainDiagnostics diag;
    diag.acceptance_rates = samples.diagnostics.acceptance_rates;
    for (double a : diag.acceptance_rates)
        if (a < 0.1 || a > 0.6) diag.acceptance_warning = true;

    const auto& lengths = samples.diagnostics.chain_lengths;
    const int chains = static_cast<int>(lengths.size());
    if (chains < 2) return diag;

    const int coords = 2 * samples.modes;
    diag.variance_ratios.assign(coords, 0.0);
    for (int coord = 0; coord < coords; ++coord) {
        const int mode = coord / 2;
        const bool imag_part = coord % 2;
        std::vector<double> chain_mean(chains, 0.0), chain_var(chains, 0.0);
        long long offset = 0;
        double n_avg = 0.0;
        for (int c = 0; c < chains; ++c) {
            const long long n = lengths[c];
            double mean = 0.0;
            for (long long i = 0; i < n; ++i) {
                const Complex z = samples.data[(offset + i) * samples.modes + mode];
                mean += imag_part ? z.imag() : z.real();
            }
            mean /= n;
            double var = 0.0;
            for (long long i = 0; i < n; ++i) {
                const Complex z = samples.data[(offset + i) * samples.modes + mode];
                const double v = (imag_part ? z.imag() : z.real()) - mean;
                var += v * v;
            }
            chain_mean[c] = mean;
            chain_var[c] = var / std::max<long long>(1, n - 1);
            offset += n;
            n_avg += n;
        }
        n_avg /= chains;

        double grand = 0.0;
        for (double mu : chain_mean) grand += mu;
        grand /= chains;
        double between = 0.0;
        for (double mu : chain_mean) between += (mu - grand) * (mu - grand);
        between *= n_avg / (chains - 1);
        double within = 0.0;
        for (double v : chain_var) within += v;
        within /= chains;

        // Gelman-Rubin style shrink factor.
        const double pooled = (n_avg - 1.0) / n_avg * within + between / n_avg;
        diag.variance_ratios[coord] = within > 0.0 ? std::sqrt(pooled / within) : 1.0;
        if (diag.variance_ratios[coord] > 1.2) diag.mixing_warning = true;
    }
    return diag;
}

}  // namespace cvqst
