#include "cvqst/measurement.hpp"

#include <atomic>
#include <cmath>
#include <random>

namespace cvqst {

PhaseSpaceGrid PhaseSpaceGrid::uniform(int num_modes, double alpha_max, int points) {
    PhaseSpaceGrid g;
    g.modes.assign(num_modes, Axis{alpha_max, points});
    g.validate();
    return g;
}

void PhaseSpaceGrid::validate() const {
    if (modes.empty()) throw InvalidParameter("PhaseSpaceGrid: no modes");
    for (const auto& m : modes) {
        if (m.points < 2) throw InvalidParameter("PhaseSpaceGrid: points_per_axis must be >= 2");
        if (m.alpha_max <= 0.0) throw InvalidParameter("PhaseSpaceGrid: alpha_max must be positive");
    }
}

double PhaseSpaceGrid::cell_step(int mode) const {
    return 2.0 * modes[mode].alpha_max / modes[mode].points;
}

double PhaseSpaceGrid::cell_area(int mode) const {
    const double d = cell_step(mode);
    return d * d;
}

double PhaseSpaceGrid::cell_volume() const {
    double v = 1.0;
    for (int m = 0; m < num_modes(); ++m) v *= cell_area(m);
    return v;
}

long long PhaseSpaceGrid::cells_per_mode(int mode) const {
    const long long p = modes[mode].points;
    return p * p;
}

long long PhaseSpaceGrid::total_cells() const {
    long long t = 1;
    for (int m = 0; m < num_modes(); ++m) t *= cells_per_mode(m);
    return t;
}

std::vector<double> PhaseSpaceGrid::axis(int mode) const {
    const int p = modes[mode].points;
    const double step = cell_step(mode);
    std::vector<double> centers(p);
    for (int i = 0; i < p; ++i)
        centers[i] = -modes[mode].alpha_max + (i + 0.5) * step;
    return centers;
}

std::vector<Complex> PhaseSpaceGrid::cell_alphas(long long global_index) const {
    const int m = num_modes();
    std::vector<Complex> alphas(m);
    for (int mode = m - 1; mode >= 0; --mode) {
        const long long cells = cells_per_mode(mode);
        const long long cell = global_index % cells;
        global_index /= cells;
        const int p = modes[mode].points;
        const int ix = static_cast<int>(cell / p);  // x-major
        const int ip = static_cast<int>(cell % p);
        const double step = cell_step(mode);
        alphas[mode] = Complex(-modes[mode].alpha_max + (ix + 0.5) * step,
                               -modes[mode].alpha_max + (ip + 0.5) * step);
    }
    return alphas;
}

bool PhaseSpaceGrid::locate(const Complex* point, long long* global_index) const {
    long long idx = 0;
    for (int mode = 0; mode < num_modes(); ++mode) {
        const double amax = modes[mode].alpha_max;
        const int p = modes[mode].points;
        const double step = cell_step(mode);
        const double x = point[mode].real(), pr = point[mode].imag();
        if (x < -amax || x >= amax || pr < -amax || pr >= amax) return false;
        const int ix = std::min(p - 1, static_cast<int>((x + amax) / step));
        const int ip = std::min(p - 1, static_cast<int>((pr + amax) / step));
        idx = idx * cells_per_mode(mode) + static_cast<long long>(ix) * p + ip;
    }
    *global_index = idx;
    return true;
}

MeasurementConfig MeasurementConfig::make(std::vector<int> mode_dims, int compute_dim,
                                          std::vector<double> nbar) {
    MeasurementConfig cfg;
    cfg.mode_dims = std::move(mode_dims);
    cfg.compute_dim = compute_dim;
    if (nbar.empty()) nbar.assign(cfg.mode_dims.size(), 0.0);
    if (nbar.size() == 1 && cfg.mode_dims.size() > 1)
        nbar.assign(cfg.mode_dims.size(), nbar[0]);
    if (nbar.size() != cfg.mode_dims.size())
        throw InvalidParameter("MeasurementConfig: nbar count != mode count");
    for (double n : nbar)
        if (n < 0.0) throw InvalidParameter("MeasurementConfig: nbar must be >= 0");
    cfg.nbar = std::move(nbar);

    HilbertConfig h{cfg.mode_dims, cfg.compute_dim};
    h.validate();

    cfg.cache = std::make_shared<DisplacementCache>(build_cache(cfg.compute_dim));
    cfg.rho_h.resize(cfg.mode_dims.size());
    for (std::size_t m = 0; m < cfg.mode_dims.size(); ++m)
        if (cfg.nbar[m] > 0.0)
            cfg.rho_h[m] = thermal_state(cfg.nbar[m], cfg.compute_dim).mat;
    cfg.under_truncation_events = std::make_shared<std::atomic<long long>>(0);
    return cfg;
}

int MeasurementConfig::total_dim() const {
    int d = 1;
    for (int k : mode_dims) d *= k;
    return d;
}

bool MeasurementConfig::noiseless() const {
    for (double n : nbar)
        if (n > 0.0) return false;
    return true;
}

namespace {

void note_truncation(const MeasurementConfig& cfg, Complex alpha) {
    if (required_dimension(0, std::abs(alpha)) > cfg.compute_dim &&
        cfg.under_truncation_events)
        cfg.under_truncation_events->fetch_add(1, std::memory_order_relaxed);
}

/// First k1 amplitudes of the k2-normalized coherent state.
Vector coherent_trunc(Complex alpha, int k1, int k2) {
    return coherent_analytic(alpha, k2).amps.head(k1);
}

Matrix q_mode_core(Complex alpha, int mode, const MeasurementConfig& cfg) {
    return q_povm_mode_core(alpha, mode, cfg);
}

Matrix wigner_mode_core(Complex alpha, int mode, const MeasurementConfig& cfg) {
    note_truncation(cfg, alpha);
    const int k1 = cfg.mode_dims[mode];
    const int k2 = cfg.compute_dim;
    const Matrix b = displacement_top_rows(alpha, k1, *cfg.cache);
    Vector signs(k2);
    for (int n = 0; n < k2; ++n) signs(n) = (n % 2 == 0) ? 1.0 : -1.0;
    Matrix core = (b * signs.asDiagonal()) * b.adjoint();
    core = (core + core.adjoint().eval()) / 2.0;
    return core * (2.0 / kPi);
}

Matrix assemble_modes(const std::vector<Complex>& alphas,
                      const MeasurementConfig& cfg,
                      Matrix (*mode_core)(Complex, int, const MeasurementConfig&)) {
    if (static_cast<int>(alphas.size()) != cfg.modes())
        throw InvalidParameter("povm: outcome tuple arity != mode count");
    std::vector<Matrix> cores;
    cores.reserve(alphas.size());
    for (std::size_t m = 0; m < alphas.size(); ++m)
        cores.push_back(mode_core(alphas[m], static_cast<int>(m), cfg));
    return kron_all(cores);
}

}  // namespace

Matrix q_povm_mode_core(Complex alpha, int mode, const MeasurementConfig& cfg) {
    note_truncation(cfg, alpha);
    const int k1 = cfg.mode_dims[mode];
    if (cfg.nbar[mode] > 0.0)
        return truncated_noisy_povm(alpha, cfg.rho_h[mode], k1, cfg.compute_dim,
                                    *cfg.cache);
    const Vector c = coherent_trunc(alpha, k1, cfg.compute_dim);
    return (c * c.adjoint()) / kPi;
}

Matrix q_povm(const std::vector<Complex>& alphas, const MeasurementConfig& config) {
    return assemble_modes(alphas, config, &q_mode_core);
}

Matrix q_povm(Complex alpha, const MeasurementConfig& config) {
    return q_povm(std::vector<Complex>{alpha}, config);
}

Matrix wigner_povm(const std::vector<Complex>& alphas, const MeasurementConfig& config) {
    return assemble_modes(alphas, config, &wigner_mode_core);
}

Matrix wigner_povm(Complex alpha, const MeasurementConfig& config) {
    return wigner_povm(std::vector<Complex>{alpha}, config);
}

Vector q_rank1_vector(const std::vector<Complex>& alphas,
                      const MeasurementConfig& config) {
    if (!config.noiseless())
        throw InvalidParameter("q_rank1_vector: config has thermal noise");
    if (static_cast<int>(alphas.size()) != config.modes())
        throw InvalidParameter("q_rank1_vector: tuple arity != mode count");
    std::vector<Vector> parts;
    parts.reserve(alphas.size());
    for (std::size_t m = 0; m < alphas.size(); ++m) {
        note_truncation(config, alphas[m]);
        parts.push_back(
            coherent_trunc(alphas[m], config.mode_dims[m], config.compute_dim));
    }
    return kron_vec_all(parts);
}

double evaluate(const Matrix& rho, const Matrix& povm) {
    if (rho.rows() != povm.rows() || rho.cols() != povm.cols())
        throw InvalidDimension("evaluate: dimension mismatch");
    // Tr(rho Pi) = sum_ij rho_ij Pi_ji
    const Complex tr = (rho.array() * povm.transpose().array()).sum();
    return tr.real();
}

Matrix design_povm(const std::vector<Complex>& alphas, MeasurementKind kind,
                   const MeasurementConfig& config) {
    switch (kind) {
        case MeasurementKind::Wigner:
            return wigner_povm(alphas, config);
        case MeasurementKind::QNoiseless:
        case MeasurementKind::QNoisy:
            return q_povm(alphas, config);
    }
    throw InvalidParameter("design_povm: unknown measurement kind");
}

namespace {

// Nodes/weights for Gauss-Legendre quadrature on [-1, 1].
void gauss_legendre(int n, std::vector<double>* nodes, std::vector<double>* weights) {
    nodes->resize(n);
    weights->resize(n);
    for (int i = 0; i < n; ++i) {
        // Newton iteration from the Chebyshev estimate
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        (*nodes)[i] = x;
        (*weights)[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
}

}  // namespace

DesignSystem build_design_system(const PhaseSpaceGrid& grid,
                                 const std::vector<double>& values,
                                 MeasurementKind kind,
                                 const MeasurementConfig& config,
                                 int cell_subsamples) {
    grid.validate();
    if (grid.num_modes() != config.modes())
        throw InvalidInput("build_design_system: grid/config mode mismatch");
    if (cell_subsamples < 1)
        throw InvalidParameter("build_design_system: cell_subsamples must be >= 1");
    const long long cells = grid.total_cells();
    if (static_cast<long long>(values.size()) != cells)
        throw InvalidInput("build_design_system: values length != grid cells");

    const int d = config.total_dim();
    DesignSystem sys;
    sys.kind = kind;
    sys.total_dim = d;
    sys.a.resize(cells, static_cast<long long>(d) * d);
    sys.b.resize(cells);
    for (long long r = 0; r < cells; ++r) sys.b(r) = values[r];

    std::vector<double> nodes{0.0}, weights{2.0};
    if (cell_subsamples > 1) gauss_legendre(cell_subsamples, &nodes, &weights);

    // Per-mode cores are shared across the product lattice; precompute them.
    const int m = config.modes();
    std::vector<std::vector<Matrix>> cores(m);
    for (int mode = 0; mode < m; ++mode) {
        const auto centers = grid.axis(mode);
        const int p = grid.modes[mode].points;
        const double half_step = 0.5 * grid.cell_step(mode);
        cores[mode].resize(static_cast<std::size_t>(p) * p);
        parallel_for(p * p, [&](int cell) {
            const int ix = cell / p, ip = cell % p;
            const int k1 = config.mode_dims[mode];
            Matrix core = Matrix::Zero(k1, k1);
            double weight_total = 0.0;
            for (std::size_t i = 0; i < nodes.size(); ++i)
                for (std::size_t j = 0; j < nodes.size(); ++j) {
                    const Complex alpha(centers[ix] + half_step * nodes[i],
                                        centers[ip] + half_step * nodes[j]);
                    const double w = weights[i] * weights[j];
                    core += w * (kind == MeasurementKind::Wigner
                                     ? wigner_mode_core(alpha, mode, config)
                                     : q_mode_core(alpha, mode, config));
                    weight_total += w;
                }
            cores[mode][cell] = core / weight_total;
        });
    }

    parallel_for(static_cast<int>(cells), [&](int r) {
        long long rest = r;
        std::vector<const Matrix*> parts(m);
        for (int mode = m - 1; mode >= 0; --mode) {
            const long long per = grid.cells_per_mode(mode);
            parts[mode] = &cores[mode][rest % per];
            rest /= per;
        }
        Matrix povm = *parts[0];
        for (int mode = 1; mode < m; ++mode) povm = kron(povm, *parts[mode]);
        const Matrix povm_t = povm.transpose();
        sys.a.row(r) = Eigen::Map<const Vector>(povm_t.data(), povm_t.size()).transpose();
    });
    return sys;
}

std::vector<double> evaluate_grid(const Matrix& rho, const PhaseSpaceGrid& grid,
                                  MeasurementKind kind,
                                  const MeasurementConfig& config) {
    grid.validate();
    if (rho.rows() != config.total_dim())
        throw InvalidDimension("evaluate_grid: rho dimension != config dimension");
    const long long cells = grid.total_cells();
    std::vector<double> values(cells);
    parallel_for(static_cast<int>(cells), [&](int c) {
        values[c] = evaluate(rho, design_povm(grid.cell_alphas(c), kind, config));
    });
    return values;
}

Histogram histogram_q(const SampleSet& samples, const PhaseSpaceGrid& grid,
                      DropPolicy policy) {
    grid.validate();
    if (samples.size() == 0) throw InvalidInput("histogram_q: empty sample set");
    if (samples.modes != grid.num_modes())
        throw InvalidInput("histogram_q: sample arity != grid modes");

    const long long cells = grid.total_cells();
    std::vector<long long> counts(cells, 0);
    long long out_of_range = 0;
    const long long n = samples.size();
    for (long long i = 0; i < n; ++i) {
        long long idx;
        if (grid.locate(samples.sample(i), &idx))
            ++counts[idx];
        else
            ++out_of_range;
    }

    Histogram h;
    h.total_samples = n;
    h.out_of_range = out_of_range;
    h.policy = policy;
    const long long denom_count =
        policy == DropPolicy::Renormalize ? n - out_of_range : n;
    if (denom_count <= 0) throw InvalidInput("histogram_q: no in-range samples");
    const double denom = static_cast<double>(denom_count) * grid.cell_volume();
    h.values.resize(cells);
    for (long long c = 0; c < cells; ++c) h.values[c] = counts[c] / denom;
    return h;
}

std::vector<double> add_gaussian_noise(const std::vector<double>& values,
                                       double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw InvalidParameter("add_gaussian_noise: sigma must be >= 0");
    if (sigma == 0.0) return values;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] + gauss(rng);
    return out;
}

BatchPovms make_batch_povms(const SampleSet& samples,
                            const std::vector<int>& indices,
                            const MeasurementConfig& config, bool force_dense) {
    if (indices.empty()) throw InvalidInput("make_batch_povms: empty batch");
    if (samples.modes != config.modes())
        throw InvalidInput("make_batch_povms: sample arity != config modes");
    BatchPovms batch;
    const int bsz = static_cast<int>(indices.size());
    if (config.noiseless() && !force_dense) {
        batch.is_rank1 = true;
        batch.rank1_prefactor = std::pow(1.0 / kPi, config.modes());
        batch.rank1.resize(config.total_dim(), bsz);
        parallel_for(bsz, [&](int j) {
            const Complex* tup = samples.sample(indices[j]);
            std::vector<Complex> alphas(tup, tup + samples.modes);
            batch.rank1.col(j) = q_rank1_vector(alphas, config);
        });
        return batch;
    }
    batch.dense.resize(bsz);
    parallel_for(bsz, [&](int j) {
        const Complex* tup = samples.sample(indices[j]);
        std::vector<Complex> alphas(tup, tup + samples.modes);
        batch.dense[j] = q_povm(alphas, config);
    });
    return batch;
}

}  // namespace cvqst
