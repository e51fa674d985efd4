#include "cvqst/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cvqst {

namespace {

Json complex_entries(const Complex* data, std::size_t n) {
    Json entries = Json::array();
    for (std::size_t i = 0; i < n; ++i)
        entries.push_back({data[i].real(), data[i].imag()});
    return entries;
}

std::vector<Complex> parse_entries(const Json& entries) {
    std::vector<Complex> out;
    out.reserve(entries.size());
    for (const auto& e : entries)
        out.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("cannot open for writing: " + path);
    f << text;
    if (!f) throw InvalidInput("write failed: " + path);
}

Json read_json(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("cannot open: " + path);
    Json j;
    f >> j;
    return j;
}

std::uint64_t fnv1a(const unsigned char* bytes, std::size_t n, std::uint64_t h) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_doubles(const double* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv1a(reinterpret_cast<const unsigned char*>(data), n * sizeof(double), h);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a:%016" PRIx64, h);
    return buf;
}

const char* kind_name(MeasurementKind kind) {
    switch (kind) {
        case MeasurementKind::QNoiseless: return "q-noiseless";
        case MeasurementKind::QNoisy: return "q-noisy";
        case MeasurementKind::Wigner: return "wigner";
    }
    return "?";
}

MeasurementKind kind_from_name(const std::string& name) {
    if (name == "q-noiseless") return MeasurementKind::QNoiseless;
    if (name == "q-noisy") return MeasurementKind::QNoisy;
    if (name == "wigner") return MeasurementKind::Wigner;
    throw InvalidInput("unknown measurement kind: " + name);
}

}  // namespace

std::string sidecar_path(const std::string& path) { return path + ".meta.json"; }

void save_pure_state(const std::string& path, const PureState& psi,
                     const std::vector<int>& mode_dims, const Json& run_config) {
    Json j;
    j["kind"] = "pure";
    j["dim"] = psi.dim();
    j["mode_dims"] = mode_dims;
    j["truncation_weight"] = psi.truncation_weight;
    j["entries"] = complex_entries(psi.amps.data(), psi.amps.size());
    if (!run_config.is_null()) j["run_config"] = run_config;
    write_text(path, j.dump(2) + "\n");
}

void save_density(const std::string& path, const Matrix& rho,
                  const std::vector<int>& mode_dims, const Json& run_config) {
    Json j;
    j["kind"] = "density";
    j["dim"] = static_cast<int>(rho.rows());
    j["mode_dims"] = mode_dims;
    // row-major entry order
    const Matrix row_major = rho.transpose();
    j["entries"] = complex_entries(row_major.data(), row_major.size());
    if (!run_config.is_null()) j["run_config"] = run_config;
    write_text(path, j.dump(2) + "\n");
}

StateFile load_state(const std::string& path) {
    const Json j = read_json(path);
    StateFile out;
    out.mode_dims = j.value("mode_dims", std::vector<int>{});
    const int dim = j.at("dim").get<int>();
    const auto entries = parse_entries(j.at("entries"));
    if (j.at("kind") == "pure") {
        out.is_pure = true;
        if (static_cast<int>(entries.size()) != dim)
            throw InvalidInput("state file: entry count != dim");
        out.pure.amps = Eigen::Map<const Vector>(entries.data(), dim);
        out.pure.truncation_weight = j.value("truncation_weight", 1.0);
    } else {
        out.is_pure = false;
        if (static_cast<long long>(entries.size()) != 1LL * dim * dim)
            throw InvalidInput("state file: entry count != dim^2");
        out.density =
            Eigen::Map<const Matrix>(entries.data(), dim, dim).transpose();
    }
    if (out.mode_dims.empty()) out.mode_dims = {dim};
    return out;
}

std::string state_hash(const PureState& psi) {
    return hash_doubles(reinterpret_cast<const double*>(psi.amps.data()),
                        2 * psi.amps.size());
}

std::string state_hash(const Matrix& density) {
    const Matrix row_major = density.transpose();
    return hash_doubles(reinterpret_cast<const double*>(row_major.data()),
                        2 * row_major.size());
}

void save_samples(const std::string& path, const SampleSet& samples,
                  const Json& run_config) {
    std::ostringstream body;
    char buf[64];
    const long long n = samples.size();
    for (long long i = 0; i < n; ++i) {
        const Complex* tup = samples.sample(i);
        for (int m = 0; m < samples.modes; ++m) {
            std::snprintf(buf, sizeof(buf), "%.17g %.17g", tup[m].real(), tup[m].imag());
            body << (m ? " " : "") << buf;
        }
        body << "\n";
    }
    write_text(path, body.str());

    Json meta;
    meta["modes"] = samples.modes;
    meta["samples"] = n;
    meta["nbar"] = samples.nbar;
    meta["seed"] = samples.seed;
    meta["burn_in"] = samples.burn_in;
    meta["thinning"] = samples.thinning;
    meta["proposal_sigma"] = samples.proposal_sigma;
    meta["state_hash"] = samples.state_hash;
    meta["diagnostics"] = {
        {"acceptance_rates", samples.diagnostics.acceptance_rates},
        {"chain_lengths", samples.diagnostics.chain_lengths},
        {"start_resamples", samples.diagnostics.start_resamples},
    };
    if (!run_config.is_null()) meta["run_config"] = run_config;
    meta["timestamp"] = static_cast<long long>(std::time(nullptr));
    write_text(sidecar_path(path), meta.dump(2) + "\n");
}

SampleSet load_samples(const std::string& path) {
    const Json meta = read_json(sidecar_path(path));
    SampleSet s;
    s.modes = meta.at("modes").get<int>();
    s.nbar = meta.value("nbar", std::vector<double>{});
    s.seed = meta.value("seed", std::uint64_t(0));
    s.burn_in = meta.value("burn_in", 0LL);
    s.thinning = meta.value("thinning", 1);
    s.proposal_sigma = meta.value("proposal_sigma", 0.0);
    s.state_hash = meta.value("state_hash", std::string());
    if (meta.contains("diagnostics")) {
        const auto& d = meta["diagnostics"];
        s.diagnostics.acceptance_rates =
            d.value("acceptance_rates", std::vector<double>{});
        s.diagnostics.chain_lengths =
            d.value("chain_lengths", std::vector<long long>{});
        s.diagnostics.start_resamples = d.value("start_resamples", 0LL);
    }

    std::ifstream f(path);
    if (!f) throw InvalidInput("cannot open: " + path);
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        double re, im;
        int m = 0;
        while (ls >> re >> im) {
            s.data.emplace_back(re, im);
            ++m;
        }
        if (m != s.modes) throw InvalidInput("sample file: tuple arity mismatch");
    }
    const long long expected = meta.at("samples").get<long long>();
    if (s.size() != expected)
        throw InvalidInput("sample file: sample count does not match sidecar");
    return s;
}

void save_grid_values(const std::string& path, const PhaseSpaceGrid& grid,
                      const std::vector<double>& values, MeasurementKind kind,
                      const std::vector<double>& nbar,
                      const std::string& state_hash_str, const Json& run_config) {
    export_grid_csv(path, grid, values);
    Json meta;
    meta["kind"] = kind_name(kind);
    meta["modes"] = grid.num_modes();
    Json axes = Json::array();
    for (const auto& m : grid.modes)
        axes.push_back({{"alpha_max", m.alpha_max}, {"points", m.points}});
    meta["grid"] = axes;
    meta["nbar"] = nbar;
    meta["state_hash"] = state_hash_str;
    if (!run_config.is_null()) meta["run_config"] = run_config;
    meta["timestamp"] = static_cast<long long>(std::time(nullptr));
    write_text(sidecar_path(path), meta.dump(2) + "\n");
}

GridFile load_grid_values(const std::string& path) {
    const Json meta = read_json(sidecar_path(path));
    GridFile out;
    out.kind = kind_from_name(meta.at("kind").get<std::string>());
    for (const auto& axis : meta.at("grid"))
        out.grid.modes.push_back({axis.at("alpha_max").get<double>(),
                                  axis.at("points").get<int>()});
    out.grid.validate();
    out.nbar = meta.value("nbar", std::vector<double>{});
    out.state_hash = meta.value("state_hash", std::string());

    std::ifstream f(path);
    if (!f) throw InvalidInput("cannot open: " + path);
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto pos = line.find_last_of(',');
        out.values.push_back(std::stod(line.substr(pos + 1)));
    }
    if (static_cast<long long>(out.values.size()) != out.grid.total_cells())
        throw InvalidInput("grid file: value count != grid cells");
    return out;
}

Json report_to_json(const SolverReport& report, bool include_timing) {
    Json j;
    const char* algo = report.config.algorithm == Algorithm::Pgd   ? "pgd"
                       : report.config.algorithm == Algorithm::Ssg ? "ssg"
                                                                   : "assg-r";
    j["config"] = {
        {"algorithm", algo},
        {"eta0", report.config.eta0},
        {"outer_iters", report.config.outer_iters},
        {"inner_iters", report.config.inner_iters},
        {"batch_size", report.config.batch_size},
        {"seed", report.config.seed},
        {"step_rule", report.config.step_rule == StepRule::FixedLipschitz
                          ? "fixed-lipschitz"
                          : "backtracking"},
        {"max_iters", report.config.max_iters},
        {"rel_tol", report.config.rel_tol},
    };
    j["termination"] = report.termination;
    j["clamp_events"] = report.clamp_events;
    j["lipschitz_step"] = report.lipschitz_step;
    j["final_fidelity"] = report.final_fidelity;

    Json iters = Json::array();
    for (const auto& rec : report.trace) {
        Json row;
        row["iter"] = rec.iter;
        if (std::isfinite(rec.objective))
            row["objective"] = rec.objective;
        else
            row["objective"] = nullptr;
        if (rec.fidelity >= 0.0)
            row["fidelity"] = rec.fidelity;
        else
            row["fidelity"] = nullptr;
        iters.push_back(std::move(row));
    }
    j["iterations"] = std::move(iters);

    const Matrix row_major = report.rho_final.mat.transpose();
    j["final_rho"] = {
        {"dim", report.rho_final.dim()},
        {"entries", complex_entries(row_major.data(), row_major.size())},
    };

    if (include_timing) {
        std::vector<double> seconds;
        seconds.reserve(report.trace.size());
        for (const auto& rec : report.trace) seconds.push_back(rec.seconds);
        j["timing"] = {{"seconds", seconds}, {"total_seconds", report.total_seconds}};
    }
    return j;
}

void save_report(const std::string& path, const SolverReport& report,
                 const Json& run_config) {
    Json j = report_to_json(report, /*include_timing=*/true);
    if (!run_config.is_null()) j["run_config"] = run_config;
    write_text(path, j.dump(2) + "\n");
}

void save_bench_csv(const std::string& path, const std::vector<BenchRow>& rows) {
    std::ostringstream body;
    body << "dim,batch_size,reference_seconds,fast_seconds,speedup\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f,%.3f\n", r.dim, r.batch_size,
                      r.reference_seconds, r.fast_seconds, r.speedup);
        body << buf;
    }
    write_text(path, body.str());
}

void export_grid_csv(const std::string& path, const PhaseSpaceGrid& grid,
                     const std::vector<double>& values) {
    if (static_cast<long long>(values.size()) != grid.total_cells())
        throw InvalidInput("export_grid_csv: value count != grid cells");
    std::ostringstream body;
    for (int m = 0; m < grid.num_modes(); ++m)
        body << "re" << m << ",im" << m << ",";
    body << "value\n";
    char buf[64];
    for (long long c = 0; c < grid.total_cells(); ++c) {
        const auto alphas = grid.cell_alphas(c);
        for (const auto& a : alphas) {
            std::snprintf(buf, sizeof(buf), "%.12g,%.12g,", a.real(), a.imag());
            body << buf;
        }
        std::snprintf(buf, sizeof(buf), "%.17g\n", values[c]);
        body << buf;
    }
    write_text(path, body.str());
}

}  // namespace cvqst
