#ifndef CVQST_IO_HPP
#define CVQST_IO_HPP

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "cvqst/displacement.hpp"
#include "cvqst/measurement.hpp"
#include "cvqst/optimizer.hpp"

namespace cvqst {

using Json = nlohmann::json;

// --- state files (structured text: dims + [re, im] entry pairs) -------------

void save_pure_state(const std::string& path, const PureState& psi,
                     const std::vector<int>& mode_dims, const Json& run_config);
void save_density(const std::string& path, const Matrix& rho,
                  const std::vector<int>& mode_dims, const Json& run_config);

struct StateFile {
    bool is_pure = true;
    PureState pure;
    Matrix density;
    std::vector<int> mode_dims;
};

StateFile load_state(const std::string& path);

/// FNV-1a over the canonical little-endian bytes of the entries; stable
/// fingerprint tying datasets to their generating state.
std::string state_hash(const PureState& psi);
std::string state_hash(const Matrix& density);

// --- sample files (line-delimited "re im" pairs + JSON sidecar) -------------

void save_samples(const std::string& path, const SampleSet& samples,
                  const Json& run_config);
SampleSet load_samples(const std::string& path);

// --- grid value files (CSV + JSON sidecar) -----------------------------------

struct GridFile {
    PhaseSpaceGrid grid;
    std::vector<double> values;
    MeasurementKind kind = MeasurementKind::QNoiseless;
    std::vector<double> nbar;
    std::string state_hash;
};

void save_grid_values(const std::string& path, const PhaseSpaceGrid& grid,
                      const std::vector<double>& values, MeasurementKind kind,
                      const std::vector<double>& nbar,
                      const std::string& state_hash, const Json& run_config);
GridFile load_grid_values(const std::string& path);

// --- solver reports -----------------------------------------------------------

/// include_timing=false yields the deterministic payload used by the
/// reproducibility checks (wall-clock data lives in a separate block).
Json report_to_json(const SolverReport& report, bool include_timing);
void save_report(const std::string& path, const SolverReport& report,
                 const Json& run_config);

// --- CSV helpers ----------------------------------------------------------------

void save_bench_csv(const std::string& path, const std::vector<BenchRow>& rows);

/// Grid export: one row per cell, "re0,im0,...,value" with grid ordering.
void export_grid_csv(const std::string& path, const PhaseSpaceGrid& grid,
                     const std::vector<double>& values);

std::string sidecar_path(const std::string& path);

}  // namespace cvqst

#endif
