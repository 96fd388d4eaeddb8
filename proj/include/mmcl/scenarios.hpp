#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mmcl/datagen.hpp"

namespace mmcl {

enum class ScenarioKind { Seq, Dom, Gcil };
enum class GcilDistribution { Uniform, Longtail };
enum class TargetKind { ClassLabel, SuperLabel };

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::Seq;
    int num_tasks = 1;
    int classes_per_task = 0;               // Seq
    int subclasses_per_task_per_super = 0;  // Dom
    int gcil_samples_per_task = 0;
    int gcil_max_classes_per_task = 0;
    GcilDistribution gcil_distribution = GcilDistribution::Uniform;
    double gcil_power_exponent = 1.0;
    std::uint64_t seed = 0;
};

struct ScenarioTask {
    std::vector<std::size_t> train_indices;  // into Dataset::train
    std::vector<std::size_t> test_indices;   // into Dataset::test
    std::vector<int> classes;                // dataset class ids present
};

struct ScenarioStream {
    ScenarioKind kind = ScenarioKind::Seq;
    TargetKind target_kind = TargetKind::ClassLabel;
    int num_targets = 0;
    // Dataset class id -> training target, -1 when the class is unused.
    std::vector<int> class_to_target;
    // Target -> first task that introduces it, -1 when never introduced.
    std::vector<int> target_to_task;
    std::vector<ScenarioTask> tasks;
    // Set when a GCIL class pool ran dry and sampling fell back to
    // with-replacement draws.
    bool sampled_with_replacement = false;

    int target_of(const PairedExample& ex) const {
        return target_kind == TargetKind::SuperLabel
                   ? ex.superlabel
                   : class_to_target[ex.label];
    }
};

ScenarioStream build_seq(const Dataset& dataset, const ScenarioSpec& spec);
ScenarioStream build_dom(const Dataset& dataset, const ScenarioSpec& spec);
ScenarioStream build_gcil(const Dataset& dataset, const ScenarioSpec& spec);
ScenarioStream build_stream(const Dataset& dataset, const ScenarioSpec& spec);

// Structured-text serialization (task -> sample indices) for exact reruns.
void save_stream(const ScenarioStream& stream,
                 const std::filesystem::path& path);
ScenarioStream load_stream(const std::filesystem::path& path);

}  // namespace mmcl
