#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmcl {

// One paired sample: two views of the same latent class.
struct PairedExample {
    std::vector<double> audio;
    std::vector<double> visual;
    int label = 0;
    int superlabel = 0;
    int task_id = 0;
};

struct DatasetInfo {
    int num_classes = 0;
    int num_superlabels = 1;
    int dim_audio = 0;
    int dim_visual = 0;
};

struct Dataset {
    DatasetInfo info;
    std::vector<PairedExample> train;
    std::vector<PairedExample> test;
};

// Two correlated Gaussian-cluster views with independently controllable
// noise and per-task additive shift. Same spec + seed gives a bit-identical
// dataset; each parameter draws from its own substream, so e.g. changing
// shift_std_a leaves every visual vector untouched.
struct SyntheticDatasetSpec {
    int num_classes = 2;
    int samples_per_class_train = 1;
    int samples_per_class_test = 1;
    int dim_audio = 8;
    int dim_visual = 8;
    double prototype_scale = 1.0;
    double noise_std_a = 0.1;
    double noise_std_v = 0.1;
    double shift_std_a = 0.0;
    double shift_std_v = 0.0;
    // Fraction of class-discriminative signal shared across modalities.
    double cross_modal_informativeness = 0.5;
    // Number of domain-shift regimes; samples are spread round-robin.
    int num_shift_tasks = 1;
    // Supercategories assigned by contiguous class blocks.
    int num_superlabels = 1;
    std::uint64_t seed = 0;
};

Dataset generate_synthetic(const SyntheticDatasetSpec& spec);

// ---------------------------------------------------------------------------
// Precomputed-feature manifests.
//
// Manifest: line-delimited JSON. First non-blank line is a header
//   {"num_classes":C,"num_superlabels":S,"dim_audio":Da,"dim_visual":Dv}
// followed by one record per sample
//   {"audio_path":"...","visual_path":"...","label":l,"superlabel":s}
// with paths relative to the manifest's directory. Feature files are binary:
// int32 count (must be 1), int32 dim, then count*dim little-endian float32.
// ---------------------------------------------------------------------------

enum class ManifestErrorKind {
    Io,
    BadHeader,
    BadRecord,
    MissingFeatureFile,
    BadFeatureFile,
    DimensionMismatch,
    LabelOutOfRange,
    SuperlabelOutOfRange,
};

class ManifestError : public std::runtime_error {
public:
    ManifestError(ManifestErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    ManifestErrorKind kind() const { return kind_; }

private:
    ManifestErrorKind kind_;
};

struct ManifestData {
    DatasetInfo info;
    std::vector<PairedExample> examples;
};

ManifestData load_manifest(const std::filesystem::path& manifest_path);

// Writes the manifest plus per-sample feature files under
// <manifest dir>/<features_subdir>/<prefix>_{a,v}_<i>.bin.
void save_manifest(const DatasetInfo& info,
                   const std::vector<PairedExample>& examples,
                   const std::filesystem::path& manifest_path,
                   const std::string& features_subdir = "features",
                   const std::string& prefix = "x");

// Loads a train/test manifest pair and checks the headers agree.
Dataset load_dataset_from_manifests(const std::filesystem::path& train_path,
                                    const std::filesystem::path& test_path);

}  // namespace mmcl
