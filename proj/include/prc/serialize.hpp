#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "prc/benchmarks.hpp"
#include "prc/distributions.hpp"
#include "prc/gp.hpp"
#include "prc/linear_control.hpp"
#include "prc/synthesis.hpp"

// JSON / CSV persistence. All artifacts are deterministic byte-for-byte for
// a fixed input: keys are emitted sorted, doubles round-trip exactly, and
// non-finite summary fields are omitted rather than written as null.
namespace prc::io {

using json = nlohmann::json;

json matrix_to_json(const MatrixXd& m);        // nested row-major arrays
MatrixXd matrix_from_json(const json& j, const std::string& what);
json vector_to_json(const VectorXd& v);
VectorXd vector_from_json(const json& j, const std::string& what);

json law_to_json(const GaussianParameterLaw& law);
GaussianParameterLaw law_from_json(const json& j);

// A law file with a "credibility" key restores as a truncated law; plain law
// files need the credibility supplied by the caller.
json truncated_law_to_json(const TruncatedLaw& tlaw);
TruncatedLaw truncated_law_from_json(const json& j,
                                     std::optional<double> fallback_credibility = std::nullopt);

json profile_to_json(const RiskProfile& profile);
RiskProfile profile_from_json(const json& j);

json controller_to_json(const CertifiedController& ctrl);
CertifiedController controller_from_json(const json& j);

json validation_report_to_json(const ValidationReport& report);

json dataset_to_json(const TransitionDataset& data);
TransitionDataset dataset_from_json(const json& j);

// CSV with header q_1..q_{d_q}, y_1..y_{d_x}; numbers at full precision.
std::string dataset_to_csv(const TransitionDataset& data);
// Throws DomainError naming the offending 1-based line on malformed input.
TransitionDataset dataset_from_csv(const std::string& text);

json record_to_json(const bench::ExperimentRecord& record);

// Aggregate plot-ready table, one row per (cell, method):
// sigma_sq_or_rollouts,method,repetition,feasible,mean_cost,q25,q50,q75,
// instability_freq,runtime_s,seed. Unavailable values are empty fields.
std::string experiment_csv(const std::vector<bench::ExperimentRecord>& records);

// FNV-1a over the canonical (sorted-key) dump; the config provenance stamp.
std::uint64_t json_content_hash(const json& j);
std::string hash_hex(std::uint64_t h);

// Provenance block {schema, code_version, config_hash, seed} attached to
// every artifact written by the CLI.
json provenance_json(std::uint64_t config_hash, std::uint64_t seed);

std::string read_text(const std::filesystem::path& path);
// Writes to a sibling temp file, then renames; no partial artifacts remain
// on failure.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

// GP hyperparameters as configured (values are implementer defaults; the
// underlying publication does not pin them).
struct GpSettings {
    double signal_variance = 4.0;
    VectorXd lengthscales;     // empty = 2.0 per input dimension
    VectorXd noise_variances;  // empty = 1e-3 per output dimension
    bool regress_deltas = false;
};

// Declarative run document shared by all CLI commands; unknown keys are
// rejected with their full path.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "results";
    std::optional<std::string> law_path;
    std::optional<std::string> dataset_path;
    std::optional<VectorXd> operating_point;
    std::optional<CostWeights> weights;
    RiskProfile profile{0.98, 0.02, 0.20, 0.01, 0.001};
    GpSettings gp;
    SynthesisOptions synthesis;
    bench::ExperimentConfig experiment;
    std::uint64_t config_hash = 0;  // filled by the parser

    // Experiment section with profile, gp, synthesis, and seed folded in.
    bench::ExperimentConfig resolved_experiment() const;
};

RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace prc::io
