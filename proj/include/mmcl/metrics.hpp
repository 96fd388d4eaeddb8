#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmcl/mat.hpp"

namespace mmcl {

// Accuracies in [0, 100]; entry (t, j) is filled for j <= t.
class TaskPerformanceMatrix {
public:
    TaskPerformanceMatrix() = default;
    explicit TaskPerformanceMatrix(int num_tasks);

    int num_tasks() const { return num_tasks_; }
    bool filled(int t, int j) const;
    double at(int t, int j) const;
    void set(int t, int j, double accuracy);

    std::string to_csv() const;
    void save_csv(const std::filesystem::path& path) const;

private:
    int num_tasks_ = 0;
    std::vector<double> values_;  // row-major, -1 marks unfilled
};

struct StabilityPlasticity {
    double stability = 0.0;   // mean of final row excluding the diagonal
    double plasticity = 0.0;  // mean of the diagonal
    double tradeoff = 0.0;    // harmonic mean, 0 when S = P = 0
};

StabilityPlasticity stability_plasticity(const TaskPerformanceMatrix& m);

// Mean of row t over the filled entries j <= t, one value per step.
std::vector<double> mean_accuracy_per_step(const TaskPerformanceMatrix& m);

// Per-step stability curve: mean of row t over j < t, for t >= 1.
std::vector<double> stability_per_step(const TaskPerformanceMatrix& m);

// Sums per-sample softmax mass over each task's target group. `probs` is
// one probability row per sample; target_to_task maps every scored target
// to the task that introduced it. The result sums to 1.
std::vector<double> recency_bias(const Mat& probs,
                                 const std::vector<int>& target_to_task,
                                 int num_tasks);

// Equal-width binning over max probability.
double expected_calibration_error(const Mat& probs,
                                  const std::vector<int>& labels,
                                  int bins = 10);

struct CLReport {
    std::vector<double> mean_accuracy_per_step;
    std::optional<StabilityPlasticity> stability_plasticity;
    std::vector<double> stability_per_step;
    std::optional<std::vector<double>> recency_bias;
    std::optional<double> ece;

    std::string to_json() const;
};

}  // namespace mmcl
