#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mmcl/datagen.hpp"
#include "mmcl/inference.hpp"
#include "mmcl/losses.hpp"
#include "mmcl/metrics.hpp"
#include "mmcl/model.hpp"
#include "mmcl/replay.hpp"
#include "mmcl/scenarios.hpp"

namespace mmcl {

// Samm: combined objective (supervised + replayed supervised + consistency
//       + feature alignment), dynamic-ensemble evaluation.
// Er:   experience replay; plain cross entropy on one head for the task
//       batch plus a replayed batch.
// Sgd:  plain cross entropy on one head, no replay (lower bound).
// Joint: one model trained on the union of all tasks (upper bound); only
//       the final row of the task matrix is defined.
enum class Method { Samm, Er, Sgd, Joint };

// Which head Er/Sgd/Joint train and evaluate. Samm always trains all
// heads and evaluates with the dynamic ensemble.
enum class ModalityMode { Audio, Visual, Multi };

const char* method_name(Method m);
Method method_from(const std::string& name);
const char* modality_name(ModalityMode m);
ModalityMode modality_from(const std::string& name);

InferenceMode eval_mode_for(Method method, ModalityMode modality);

struct TrainConfig {
    Method method = Method::Samm;
    ModalityMode modality = ModalityMode::Multi;

    int hidden_dim = 32;
    int feature_dim = 16;
    double width_multiplier = 1.0;
    bool film_audio_conditions_visual = true;

    double lr = 0.1;
    int batch_size = 16;
    int epochs_per_task = 1;
    std::size_t buffer_capacity = 0;
    int buffer_batch_size = 0;  // 0 means same as batch_size
    LossWeights weights;
    bool calibrate = true;  // refit temperatures after each task (Samm only)

    // Evaluation modes for the per-task matrices; empty means the method's
    // canonical mode (dynamic ensemble for Samm, the trained head otherwise).
    std::vector<InferenceMode> eval_modes;

    std::uint64_t seed = 0;
};

struct TaskTrainLog {
    int task = 0;
    int steps = 0;
    LossBreakdown mean_loss;  // per-component means over the task's steps
    double mean_total = 0.0;
    double wall_ms = 0.0;
    CalibrationState calibration;  // temperatures in effect at evaluation
};

struct RunRecord {
    std::vector<TaskTrainLog> tasks;
    std::vector<std::string> warnings;
    double train_wall_ms = 0.0;
};

struct TrainResult {
    ModelBundle bundle;
    TaskPerformanceMatrix matrix;  // same as matrices.front()
    std::vector<InferenceMode> eval_modes;
    std::vector<TaskPerformanceMatrix> matrices;  // parallel to eval_modes
    RunRecord record;
    ReservoirBuffer buffer;
};

// Accuracy (percent) of `mode` predictions on the test split of one
// scenario task, scored against the stream's training targets.
double evaluate_task_accuracy(const ModelBundle& bundle, const Dataset& dataset,
                              const ScenarioStream& stream, int task,
                              InferenceMode mode);

// Runs the configured method over the scenario stream: train on each task
// in order, refresh calibration, then score all tasks seen so far. When
// `log` is non-null a line per epoch and per evaluation row is emitted.
TrainResult train_stream(const Dataset& dataset, const ScenarioStream& stream,
                         const TrainConfig& config, std::ostream* log = nullptr);

}  // namespace mmcl
