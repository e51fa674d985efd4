// Command-line driver for continuous-variable state reconstruction: state
// factories, heterodyne sample generation, grid measurement synthesis, the
// projected/stochastic solvers, and the displacement benchmark.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cvqst/io.hpp"
#include "cvqst/optimizer.hpp"
#include "cvqst/sampler.hpp"

using namespace cvqst;

namespace {

Complex parse_alpha(const std::vector<double>& parts) {
    if (parts.empty()) return Complex(0.0, 0.0);
    if (parts.size() == 1) return Complex(parts[0], 0.0);
    return Complex(parts[0], parts[1]);
}

std::vector<double> resolve_nbar(std::vector<double> nbar, int modes) {
    if (nbar.empty()) return std::vector<double>(modes, 0.0);
    if (nbar.size() == 1) return std::vector<double>(modes, nbar[0]);
    if (static_cast<int>(nbar.size()) != modes)
        throw InvalidParameter("--nbar: expected 1 value or one per mode");
    return nbar;
}

/// Default synthesis dimension: generous coverage of the displaced support,
/// floored at the thermal-displacement workhorse dimension.
int default_compute_dim(const std::vector<int>& mode_dims, double alpha_reach,
                        double nbar_max) {
    int k2 = std::max(
        40, required_dimension(0, alpha_reach + 3.0 * std::sqrt(1.0 + nbar_max)));
    for (int d : mode_dims) k2 = std::max(k2, d);
    return k2;
}

double max_mode_amplitude(const SampleSet& samples) {
    double r = 0.0;
    for (const Complex& z : samples.data) r = std::max(r, std::abs(z));
    return r;
}

struct GenStateOpts {
    std::string kind;
    std::vector<double> alpha;
    int dim = 0;
    int modes = 0;
    double nbar = 0.0;
    std::string out;
};

void run_gen_state(const GenStateOpts& o, const Json& run_config) {
    if (o.kind == "thermal") {
        if (o.dim < 2) throw InvalidParameter("thermal: --dim must be >= 2");
        const DensityMatrix rho = thermal_state(o.nbar, o.dim);
        save_density(o.out, rho.mat, {o.dim}, run_config);
        return;
    }

    PureState psi;
    std::vector<int> mode_dims;
    if (o.kind == "cat") {
        if (o.dim < 1) throw InvalidParameter("cat: --dim required");
        psi = cat_state(parse_alpha(o.alpha), o.dim);
        mode_dims = {o.dim};
    } else if (o.kind == "coherent") {
        if (o.dim < 1) throw InvalidParameter("coherent: --dim required");
        psi = coherent_analytic(parse_alpha(o.alpha), o.dim);
        mode_dims = {o.dim};
    } else if (o.kind == "vacuum") {
        if (o.dim < 1) throw InvalidParameter("vacuum: --dim required");
        psi.amps = Vector::Zero(o.dim);
        psi.amps(0) = 1.0;
        mode_dims = {o.dim};
    } else if (o.kind == "binomial0") {
        psi = binomial_logical_zero(o.dim > 0 ? o.dim : 5);
        mode_dims = {psi.dim()};
    } else if (o.kind == "binomial1") {
        psi = binomial_logical_one(o.dim > 0 ? o.dim : 5);
        mode_dims = {psi.dim()};
    } else if (o.kind == "bell") {
        const int per_mode = o.dim > 0 ? o.dim : 5;
        psi = logical_bell(per_mode);
        mode_dims = {per_mode, per_mode};
    } else if (o.kind == "w") {
        if (o.modes < 2) throw InvalidParameter("w: --modes must be >= 2");
        psi = w_state(o.modes);
        mode_dims.assign(o.modes, 2);
    } else {
        throw InvalidParameter("unknown state kind: " + o.kind);
    }
    save_pure_state(o.out, psi, mode_dims, run_config);
}

struct GenDataOpts {
    std::string state;
    std::vector<double> nbar;
    long long samples = 100000;
    std::uint64_t seed = 0;
    long long burn_in = 2000;
    int thinning = 5;
    int chains = 4;
    double proposal_sigma = 0.0;
    int compute_dim = 0;
    std::string out;
};

void run_gen_data(const GenDataOpts& o, const Json& run_config) {
    const StateFile state = load_state(o.state);
    const int modes = static_cast<int>(state.mode_dims.size());
    const auto nbar = resolve_nbar(o.nbar, modes);

    DensityMatrix rho = state.is_pure
                            ? DensityMatrix::trusted(state.pure.amps *
                                                     state.pure.amps.adjoint())
                            : DensityMatrix::from(state.density);

    // reach heuristic: photon capacity of the stored dims
    double total_levels = 0.0;
    for (int m = 0; m < modes; ++m) total_levels += state.mode_dims[m] - 1;
    double nbar_max = 0.0;
    for (double n : nbar) nbar_max = std::max(nbar_max, n);
    const int k2 = o.compute_dim > 0
                       ? o.compute_dim
                       : default_compute_dim(state.mode_dims,
                                             std::sqrt(total_levels), nbar_max);

    const auto cfg = MeasurementConfig::make(state.mode_dims, k2, nbar);
    McmcConfig mc;
    mc.n_samples = o.samples;
    mc.burn_in = o.burn_in;
    mc.thinning = o.thinning;
    mc.n_chains = o.chains;
    mc.proposal_sigma = o.proposal_sigma;
    mc.seed = o.seed;

    SampleSet samples = sample_q(rho, cfg, mc);
    samples.state_hash =
        state.is_pure ? state_hash(state.pure) : state_hash(state.density);
    save_samples(o.out, samples, run_config);

    const ChainDiagnostics diag = chain_diagnostics(samples);
    if (diag.acceptance_warning)
        std::cerr << "warning: chain acceptance rate outside [0.1, 0.6]\n";
    if (diag.mixing_warning)
        std::cerr << "warning: between/within chain variance ratio exceeds 1.2\n";
    std::cout << "wrote " << samples.size() << " samples to " << o.out << "\n";
}

struct GenGridOpts {
    std::string state;
    std::string kind = "q";
    int grid = 20;
    double alpha_max = 4.0;
    double noise_sigma = 0.0;
    std::uint64_t noise_seed = 0;
    std::vector<double> nbar;
    int compute_dim = 0;
    std::string out;
};

void run_gen_grid(const GenGridOpts& o, const Json& run_config) {
    const StateFile state = load_state(o.state);
    const int modes = static_cast<int>(state.mode_dims.size());
    const auto nbar = resolve_nbar(o.nbar, modes);
    double nbar_max = 0.0;
    for (double n : nbar) nbar_max = std::max(nbar_max, n);

    const int k2 = o.compute_dim > 0
                       ? o.compute_dim
                       : default_compute_dim(state.mode_dims,
                                             o.alpha_max * std::sqrt(2.0), nbar_max);
    const auto cfg = MeasurementConfig::make(state.mode_dims, k2, nbar);
    const PhaseSpaceGrid grid = PhaseSpaceGrid::uniform(modes, o.alpha_max, o.grid);

    MeasurementKind kind;
    if (o.kind == "wigner")
        kind = MeasurementKind::Wigner;
    else if (o.kind == "q")
        kind = cfg.noiseless() ? MeasurementKind::QNoiseless : MeasurementKind::QNoisy;
    else
        throw InvalidParameter("--kind must be q or wigner");

    const Matrix rho = state.is_pure
                           ? Matrix(state.pure.amps * state.pure.amps.adjoint())
                           : state.density;
    std::vector<double> values = evaluate_grid(rho, grid, kind, cfg);
    if (o.noise_sigma > 0.0)
        values = add_gaussian_noise(values, o.noise_sigma, o.noise_seed);

    const std::string hash =
        state.is_pure ? state_hash(state.pure) : state_hash(state.density);
    save_grid_values(o.out, grid, values, kind, nbar, hash, run_config);
    std::cout << "wrote " << values.size() << " grid values to " << o.out << "\n";
}

struct ReconstructOpts {
    std::string data;
    std::string method = "pgd";
    std::string target;
    std::string out;
    std::string rho_out;
    std::vector<int> dims;
    int compute_dim = 0;
    std::vector<double> nbar;
    int grid = 0;            // bins raw samples into a histogram design system
    double alpha_max = 0.0;
    std::string drop_policy = "exclude";
    int cell_subsamples = 3;  // histogram pipeline: POVM cell-average order
    bool plain_step = false;  // disable momentum in the deterministic solver
    double eta0 = 0.5;
    int outer = 10;
    int inner = 100;
    int batch = 512;
    std::uint64_t seed = 0;
    int max_iters = 2000;
    std::string step_rule = "fixed";
};

bool looks_like_grid(const std::string& path) {
    try {
        std::ifstream f(sidecar_path(path));
        if (!f) return false;
        Json meta;
        f >> meta;
        return meta.contains("grid");
    } catch (...) {
        return false;
    }
}

void run_reconstruct(const ReconstructOpts& o, const Json& run_config) {
    SolverConfig solver;
    solver.eta0 = o.eta0;
    solver.outer_iters = o.outer;
    solver.inner_iters = o.inner;
    solver.batch_size = o.batch;
    solver.seed = o.seed;
    solver.max_iters = o.max_iters;
    solver.step_rule = o.step_rule == "backtracking" ? StepRule::Backtracking
                                                     : StepRule::FixedLipschitz;
    solver.momentum = !o.plain_step && solver.step_rule == StepRule::FixedLipschitz;
    if (o.method == "pgd")
        solver.algorithm = Algorithm::Pgd;
    else if (o.method == "ssg")
        solver.algorithm = Algorithm::Ssg;
    else if (o.method == "assg-r")
        solver.algorithm = Algorithm::AssgR;
    else
        throw InvalidParameter("--method must be pgd, ssg or assg-r");

    PureState target;
    bool have_target = false;
    if (!o.target.empty()) {
        const StateFile t = load_state(o.target);
        if (!t.is_pure) throw InvalidInput("--target must be a pure state file");
        target = t.pure;
        have_target = true;
    }

    SolverReport report;
    const bool grid_data = looks_like_grid(o.data);
    if (solver.algorithm == Algorithm::Pgd && !grid_data && o.grid <= 0)
        throw InvalidInput(
            "pgd needs grid data: pass a gen-grid CSV, or raw samples together "
            "with --grid and --alpha-max for the histogram pipeline");

    if (!grid_data && solver.algorithm == Algorithm::Pgd) {
        // histogram pipeline: bin heterodyne samples, then least squares
        const SampleSet samples = load_samples(o.data);
        const int modes = samples.modes;
        if (o.alpha_max <= 0.0)
            throw InvalidParameter("--alpha-max required with --grid");
        std::vector<int> dims = o.dims;
        if (dims.empty()) throw InvalidParameter("--dim: reconstruction dims required");
        if (dims.size() == 1 && modes > 1) dims.assign(modes, dims[0]);
        if (static_cast<int>(dims.size()) != modes)
            throw InvalidParameter("--dim count must match the data's mode count");
        auto nbar = o.nbar.empty() ? samples.nbar : resolve_nbar(o.nbar, modes);
        if (nbar.empty()) nbar.assign(modes, 0.0);
        double nbar_max = 0.0;
        for (double n : nbar) nbar_max = std::max(nbar_max, n);
        const PhaseSpaceGrid grid = PhaseSpaceGrid::uniform(modes, o.alpha_max, o.grid);
        const Histogram hist = histogram_q(
            samples, grid,
            o.drop_policy == "renormalize" ? DropPolicy::Renormalize
                                           : DropPolicy::Exclude);
        if (hist.out_of_range > 0)
            std::cerr << "note: " << hist.out_of_range
                      << " samples fell outside the grid\n";
        const int k2 =
            o.compute_dim > 0
                ? o.compute_dim
                : default_compute_dim(dims, o.alpha_max * std::sqrt(2.0), nbar_max);
        const auto cfg = MeasurementConfig::make(dims, k2, nbar);
        const MeasurementKind kind = cfg.noiseless() ? MeasurementKind::QNoiseless
                                                     : MeasurementKind::QNoisy;
        // rows carry the cell-averaged POVM: that is what a histogram measures
        const DesignSystem sys =
            build_design_system(grid, hist.values, kind, cfg, o.cell_subsamples);
        report = pgd_least_squares(sys, solver, have_target ? &target : nullptr);
    } else if (grid_data) {
        const GridFile gf = load_grid_values(o.data);
        const int modes = gf.grid.num_modes();
        std::vector<int> dims = o.dims;
        if (dims.empty()) throw InvalidParameter("--dim: reconstruction dims required");
        if (dims.size() == 1 && modes > 1) dims.assign(modes, dims[0]);
        if (static_cast<int>(dims.size()) != modes)
            throw InvalidParameter("--dim count must match the data's mode count");
        auto nbar = o.nbar.empty() ? gf.nbar : resolve_nbar(o.nbar, modes);
        if (nbar.empty()) nbar.assign(modes, 0.0);
        double nbar_max = 0.0;
        for (double n : nbar) nbar_max = std::max(nbar_max, n);
        double amax = 0.0;
        for (const auto& ax : gf.grid.modes) amax = std::max(amax, ax.alpha_max);
        const int k2 = o.compute_dim > 0
                           ? o.compute_dim
                           : default_compute_dim(dims, amax * std::sqrt(2.0), nbar_max);
        const auto cfg = MeasurementConfig::make(dims, k2, nbar);
        const DesignSystem sys = build_design_system(gf.grid, gf.values, gf.kind, cfg);
        if (solver.algorithm == Algorithm::Pgd)
            report = pgd_least_squares(sys, solver, have_target ? &target : nullptr);
        else
            report = stochastic_least_squares(sys, solver,
                                              have_target ? &target : nullptr);
    } else {
        const SampleSet samples = load_samples(o.data);
        const int modes = samples.modes;
        std::vector<int> dims = o.dims;
        if (dims.empty()) throw InvalidParameter("--dim: reconstruction dims required");
        if (dims.size() == 1 && modes > 1) dims.assign(modes, dims[0]);
        if (static_cast<int>(dims.size()) != modes)
            throw InvalidParameter("--dim count must match the data's mode count");
        auto nbar = o.nbar.empty() ? samples.nbar : resolve_nbar(o.nbar, modes);
        if (nbar.empty()) nbar.assign(modes, 0.0);
        const int k2 =
            o.compute_dim > 0
                ? o.compute_dim
                : std::max(40, required_dimension(0, max_mode_amplitude(samples)));
        const auto cfg = MeasurementConfig::make(dims, k2, nbar);
        const PovmFactory factory{cfg};
        report = solver.algorithm == Algorithm::Ssg
                     ? ssg_solve(samples, factory, solver,
                                 have_target ? &target : nullptr)
                     : assg_r_solve(samples, factory, solver,
                                    have_target ? &target : nullptr);
    }

    if (!o.out.empty()) save_report(o.out, report, run_config);
    if (!o.rho_out.empty())
        save_density(o.rho_out, report.rho_final.mat, {}, run_config);
    if (have_target) std::printf("final fidelity: %.6f\n", report.final_fidelity);
    std::printf("termination: %s after %lld iterations (%.2f s)\n",
                report.termination.c_str(),
                report.trace.empty() ? 0LL : report.trace.back().iter,
                report.total_seconds);
}

struct BenchOpts {
    std::vector<int> dims{16, 32, 64, 128};
    int batch = 512;
    std::uint64_t seed = 0;
    std::string out;
};

void run_bench(const BenchOpts& o) {
    const auto rows = benchmark_displacement(o.dims, o.batch, o.seed);
    std::printf("%6s %10s %14s %12s %9s\n", "dim", "batch", "reference_s", "fast_s",
                "speedup");
    for (const auto& r : rows)
        std::printf("%6d %10d %14.4f %12.4f %8.1fx\n", r.dim, r.batch_size,
                    r.reference_seconds, r.fast_seconds, r.speedup);
    if (!o.out.empty()) save_bench_csv(o.out, rows);
}

struct ExportGridOpts {
    std::string rho;
    std::string kind = "q";
    int grid = 20;
    double alpha_max = 4.0;
    std::vector<double> nbar;
    int compute_dim = 0;
    std::string out;
};

void run_export_grid(const ExportGridOpts& o) {
    const StateFile state = load_state(o.rho);
    const int modes = static_cast<int>(state.mode_dims.size());
    const auto nbar = resolve_nbar(o.nbar, modes);
    double nbar_max = 0.0;
    for (double n : nbar) nbar_max = std::max(nbar_max, n);
    const int k2 = o.compute_dim > 0
                       ? o.compute_dim
                       : default_compute_dim(state.mode_dims,
                                             o.alpha_max * std::sqrt(2.0), nbar_max);
    const auto cfg = MeasurementConfig::make(state.mode_dims, k2, nbar);
    const PhaseSpaceGrid grid = PhaseSpaceGrid::uniform(modes, o.alpha_max, o.grid);
    MeasurementKind kind;
    if (o.kind == "wigner")
        kind = MeasurementKind::Wigner;
    else if (o.kind == "q")
        kind = cfg.noiseless() ? MeasurementKind::QNoiseless : MeasurementKind::QNoisy;
    else
        throw InvalidParameter("--kind must be q or wigner");
    const Matrix rho = state.is_pure
                           ? Matrix(state.pure.amps * state.pure.amps.adjoint())
                           : state.density;
    export_grid_csv(o.out, grid, evaluate_grid(rho, grid, kind, cfg));
    std::cout << "wrote " << grid.total_cells() << " cells to " << o.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous-variable quantum state tomography toolkit"};
    app.require_subcommand(1);

    GenStateOpts gs;
    auto* gen_state = app.add_subcommand("gen-state", "write a canonical test state");
    gen_state->add_option("--kind", gs.kind,
                          "cat|coherent|vacuum|binomial0|binomial1|bell|w|thermal")
        ->required();
    gen_state->add_option("--alpha", gs.alpha, "amplitude (re [im])")->expected(1, 2);
    gen_state->add_option("--dim", gs.dim, "truncated dimension (per mode for bell)");
    gen_state->add_option("--modes", gs.modes, "mode count (w state)");
    gen_state->add_option("--nbar", gs.nbar, "thermal mean photon number");
    gen_state->add_option("--out", gs.out, "output state file")->required();

    GenDataOpts gd;
    auto* gen_data = app.add_subcommand("gen-data", "draw heterodyne samples by MCMC");
    gen_data->add_option("--state", gd.state, "generating state file")->required();
    gen_data->add_option("--nbar", gd.nbar, "noise photon number (1 or per mode)");
    gen_data->add_option("--samples", gd.samples, "sample count")->required();
    gen_data->add_option("--seed", gd.seed, "master seed");
    gen_data->add_option("--burn-in", gd.burn_in, "discarded leading steps per chain");
    gen_data->add_option("--thinning", gd.thinning, "keep every n-th state");
    gen_data->add_option("--chains", gd.chains, "independent chains");
    gen_data->add_option("--proposal-sigma", gd.proposal_sigma,
                         "random-walk step scale (default 0.5 sqrt(nbar+1))");
    gen_data->add_option("--compute-dim", gd.compute_dim,
                         "override synthesis dimension");
    gen_data->add_option("--out", gd.out, "output sample file")->required();

    GenGridOpts gg;
    auto* gen_grid =
        app.add_subcommand("gen-grid", "evaluate Q/Wigner values on a grid");
    gen_grid->add_option("--state", gg.state, "state file")->required();
    gen_grid->add_option("--kind", gg.kind, "q|wigner");
    gen_grid->add_option("--grid", gg.grid, "points per axis");
    gen_grid->add_option("--alpha-max", gg.alpha_max, "phase-space limit");
    gen_grid->add_option("--noise-sigma", gg.noise_sigma, "gaussian noise level");
    gen_grid->add_option("--noise-seed", gg.noise_seed, "noise seed");
    gen_grid->add_option("--nbar", gg.nbar, "POVM noise photon number");
    gen_grid->add_option("--compute-dim", gg.compute_dim,
                         "override synthesis dimension");
    gen_grid->add_option("--out", gg.out, "output CSV")->required();

    ReconstructOpts rc;
    auto* reconstruct = app.add_subcommand("reconstruct", "run a solver on a dataset");
    reconstruct->add_option("--data", rc.data, "samples file or grid CSV")->required();
    reconstruct->add_option("--method", rc.method, "pgd|ssg|assg-r")->required();
    reconstruct->add_option("--target", rc.target, "reference pure state for fidelity");
    reconstruct->add_option("--out", rc.out, "report JSON path");
    reconstruct->add_option("--rho-out", rc.rho_out, "final density matrix path");
    reconstruct->add_option("--dim", rc.dims, "reconstruction dims (1 or per mode)");
    reconstruct->add_option("--compute-dim", rc.compute_dim, "override synthesis dim");
    reconstruct->add_option("--nbar", rc.nbar, "override noise photon numbers");
    reconstruct->add_option("--grid", rc.grid,
                            "bin samples on a grid of this many points per axis");
    reconstruct->add_option("--alpha-max", rc.alpha_max, "histogram phase-space limit");
    reconstruct->add_option("--drop-policy", rc.drop_policy,
                            "out-of-range handling: exclude|renormalize");
    reconstruct->add_option("--cell-subsamples", rc.cell_subsamples,
                            "histogram rows: POVM cell-average quadrature order");
    reconstruct->add_flag("--plain-step", rc.plain_step,
                          "disable momentum in the deterministic solver");
    reconstruct->add_option("--eta0", rc.eta0, "initial learning rate");
    reconstruct->add_option("--outer", rc.outer, "outer rounds E");
    reconstruct->add_option("--inner", rc.inner, "inner steps B");
    reconstruct->add_option("--batch", rc.batch, "mini-batch size");
    reconstruct->add_option("--seed", rc.seed, "shuffle seed");
    reconstruct->add_option("--max-iters", rc.max_iters, "pgd iteration cap");
    reconstruct->add_option("--step-rule", rc.step_rule, "fixed|backtracking");

    BenchOpts bn;
    auto* bench = app.add_subcommand("bench-displacement",
                                     "time fast vs reference displacement");
    bench->add_option("--dims", bn.dims, "dimensions to test");
    bench->add_option("--batch", bn.batch, "batch size");
    bench->add_option("--seed", bn.seed, "amplitude seed");
    bench->add_option("--out", bn.out, "CSV output path");

    ExportGridOpts eg;
    auto* export_grid =
        app.add_subcommand("export-grid", "export Q/Wigner values of a state");
    export_grid->add_option("--rho", eg.rho, "state file (pure or density)")
        ->required();
    export_grid->add_option("--kind", eg.kind, "q|wigner");
    export_grid->add_option("--grid", eg.grid, "points per axis");
    export_grid->add_option("--alpha-max", eg.alpha_max, "phase-space limit");
    export_grid->add_option("--nbar", eg.nbar, "POVM noise photon number");
    export_grid->add_option("--compute-dim", eg.compute_dim, "override synthesis dim");
    export_grid->add_option("--out", eg.out, "CSV output path")->required();

    try {
        app.parse(argc, argv);
        Json run_config;
        run_config["argv"] = std::vector<std::string>(argv, argv + argc);
        if (gen_state->parsed()) run_gen_state(gs, run_config);
        if (gen_data->parsed()) run_gen_data(gd, run_config);
        if (gen_grid->parsed()) run_gen_grid(gg, run_config);
        if (reconstruct->parsed()) run_reconstruct(rc, run_config);
        if (bench->parsed()) run_bench(bn);
        if (export_grid->parsed()) run_export_grid(eg);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const NumericFailure& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
