#pragma once

#include <vector>

#include "mmcl/datagen.hpp"
#include "mmcl/losses.hpp"
#include "mmcl/model.hpp"
#include "mmcl/replay.hpp"

namespace mmcl {

enum class InferenceMode { Audio, Visual, Multi, Dynamic };

const char* inference_mode_name(InferenceMode mode);
InferenceMode inference_mode_from(const std::string& name);

struct CalibrationState {
    double t_a = 1.0;
    double t_v = 1.0;
    double t_av = 1.0;
};

struct Prediction {
    int label = 0;
    std::vector<double> scores;
};

// Confidence-weighted ensemble of the three heads: each head's logits are
// divided by its temperature, weighted by its own max softmax probability,
// and summed. With scale_logits = false the weights still come from the
// scaled logits but the raw logits are ensembled.
std::vector<double> dynamic_ensemble(const std::vector<double>& z_a,
                                     const std::vector<double>& z_v,
                                     const std::vector<double>& z_av,
                                     const CalibrationState& calibration,
                                     bool scale_logits = true);

// Scores are the temperature-scaled logits of the selected head (or the
// ensemble output for Dynamic); argmax ties break to the lowest class id.
Prediction predict(const ModelBundle& bundle, const PairedExample& example,
                   InferenceMode mode, bool ensemble_scale_logits = true);

// Batch variant reusing one forward pass; returns one row of scores per
// example.
Mat predict_scores(const ModelBundle& bundle, const BatchOutput& out,
                   InferenceMode mode, bool ensemble_scale_logits = true);

int argmax_lowest(const double* v, std::size_t n);

// Per-head temperature fit on the buffer: minimizes mean NLL of
// softmax(z / T) over log T in [-3, 3] (coarse grid plus golden-section
// refinement), never worse than T = 1. Temperatures are installed in the
// bundle and returned. An empty buffer leaves the bundle unchanged.
CalibrationState calibrate(ModelBundle& bundle,
                           const std::vector<BufferEntry>& buffer_entries);

// Mean NLL of softmax(z/T) rows against labels; exposed for tests.
double nll_at_temperature(const Mat& logits, const std::vector<int>& labels,
                          double temperature);

// Single-head temperature fit used by calibrate(); exposed for tests.
double fit_temperature(const Mat& logits, const std::vector<int>& labels);

}  // namespace mmcl
