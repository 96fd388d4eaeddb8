#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcl/datagen.hpp"
#include "mmcl/scenarios.hpp"
#include "mmcl/trainer.hpp"

namespace mmcl {

inline constexpr int kResultsSchemaVersion = 1;

// Raised for anything the user can fix in the config file; the CLI maps it
// to its own exit code, distinct from runtime failures.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetConfig {
    bool synthetic = true;
    SyntheticDatasetSpec spec;  // when synthetic
    std::filesystem::path train_manifest;
    std::filesystem::path test_manifest;
};

struct ExperimentConfig {
    std::string name = "experiment";
    DatasetConfig dataset;
    ScenarioSpec scenario;
    TrainConfig train;
    // Resolved evaluation modes, primary first. Defaults to the method's
    // canonical mode. Non-Samm methods may only request the head they train.
    std::vector<InferenceMode> inference_modes;
    std::filesystem::path output_dir = "out";
    std::vector<std::uint64_t> seeds;
};

// Strict parse: unknown keys, wrong types, and contradictory settings are
// all ConfigErrors with field-level messages.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Canonical JSON echo of every resolved field; written next to results so
// a run can be reproduced from its artifacts alone.
std::string resolved_config_json(const ExperimentConfig& config);

Dataset build_dataset(const DatasetConfig& config);

struct RunArtifacts {
    std::filesystem::path results_json;
    std::filesystem::path resolved_config;
    std::vector<std::filesystem::path> matrix_csvs;
    std::vector<std::filesystem::path> run_logs;
};

// Trains every seed, writes results.json / config_resolved.json /
// matrix_<seed>[_<mode>].csv / run_<seed>.log under output_dir.
// results.json is deterministic: reruns produce identical bytes.
RunArtifacts run_experiment(const ExperimentConfig& config);

// Side-by-side table of one row per (results file, mode): accuracy and
// stability metrics as mean +/- std, plus each row's final-accuracy delta
// against the first row. Returns aligned text; csv_out (optional) receives
// the same table as CSV.
std::string compare_results(const std::vector<std::filesystem::path>& files,
                            std::string* csv_out = nullptr);

// Static SVG line chart of mean accuracy per step, one polyline per
// (results file, mode) that reports a per-step curve.
std::string plot_results_svg(const std::vector<std::filesystem::path>& files);

}  // namespace mmcl
