#include "mmcl/metrics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mmcl {

TaskPerformanceMatrix::TaskPerformanceMatrix(int num_tasks)
    : num_tasks_(num_tasks),
      values_(static_cast<std::size_t>(num_tasks) * num_tasks, -1.0) {
    if (num_tasks < 1)
        throw std::invalid_argument("task matrix needs >= 1 task");
}

bool TaskPerformanceMatrix::filled(int t, int j) const {
    assert(t >= 0 && t < num_tasks_ && j >= 0 && j < num_tasks_);
    return values_[static_cast<std::size_t>(t) * num_tasks_ + j] >= 0.0;
}

double TaskPerformanceMatrix::at(int t, int j) const {
    assert(filled(t, j));
    return values_[static_cast<std::size_t>(t) * num_tasks_ + j];
}

void TaskPerformanceMatrix::set(int t, int j, double accuracy) {
    assert(t >= 0 && t < num_tasks_ && j >= 0 && j <= t);
    if (accuracy < 0.0 || accuracy > 100.0)
        throw std::invalid_argument("accuracy outside [0, 100]");
    values_[static_cast<std::size_t>(t) * num_tasks_ + j] = accuracy;
}

std::string TaskPerformanceMatrix::to_csv() const {
    std::ostringstream os;
    os << "after_task";
    for (int j = 0; j < num_tasks_; ++j) os << ",task_" << j;
    os << "\n";
    for (int t = 0; t < num_tasks_; ++t) {
        os << t;
        for (int j = 0; j < num_tasks_; ++j) {
            os << ",";
            if (filled(t, j)) os << at(t, j);
        }
        os << "\n";
    }
    return os.str();
}

void TaskPerformanceMatrix::save_csv(
    const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot write matrix csv " + path.string());
    os << to_csv();
}

StabilityPlasticity stability_plasticity(const TaskPerformanceMatrix& m) {
    const int T = m.num_tasks();
    if (T < 2)
        throw std::invalid_argument(
            "stability is undefined for a single-task matrix");
    StabilityPlasticity out;
    for (int t = 0; t < T; ++t) out.plasticity += m.at(t, t);
    out.plasticity /= T;
    for (int j = 0; j < T - 1; ++j) out.stability += m.at(T - 1, j);
    out.stability /= (T - 1);
    const double sum = out.stability + out.plasticity;
    out.tradeoff =
        sum == 0.0 ? 0.0 : 2.0 * out.stability * out.plasticity / sum;
    return out;
}

std::vector<double> mean_accuracy_per_step(const TaskPerformanceMatrix& m) {
    std::vector<double> out(m.num_tasks());
    for (int t = 0; t < m.num_tasks(); ++t) {
        double acc = 0.0;
        for (int j = 0; j <= t; ++j) acc += m.at(t, j);
        out[t] = acc / (t + 1);
    }
    return out;
}

std::vector<double> stability_per_step(const TaskPerformanceMatrix& m) {
    std::vector<double> out;
    for (int t = 1; t < m.num_tasks(); ++t) {
        double acc = 0.0;
        for (int j = 0; j < t; ++j) acc += m.at(t, j);
        out.push_back(acc / t);
    }
    return out;
}

std::vector<double> recency_bias(const Mat& probs,
                                 const std::vector<int>& target_to_task,
                                 int num_tasks) {
    if (probs.rows() == 0)
        throw std::invalid_argument("recency_bias: empty input");
    if (probs.cols() != target_to_task.size())
        throw std::invalid_argument("recency_bias: map size mismatch");
    for (std::size_t c = 0; c < target_to_task.size(); ++c)
        if (target_to_task[c] < 0 || target_to_task[c] >= num_tasks)
            throw std::invalid_argument(
                "recency_bias: target " + std::to_string(c) +
                " is not mapped to any task");

    std::vector<double> mean_probs(probs.cols(), 0.0);
    for (std::size_t r = 0; r < probs.rows(); ++r)
        for (std::size_t c = 0; c < probs.cols(); ++c)
            mean_probs[c] += probs.row(r)[c];
    for (double& p : mean_probs) p /= static_cast<double>(probs.rows());

    std::vector<double> out(num_tasks, 0.0);
    for (std::size_t c = 0; c < mean_probs.size(); ++c)
        out[target_to_task[c]] += mean_probs[c];
    return out;
}

double expected_calibration_error(const Mat& probs,
                                  const std::vector<int>& labels, int bins) {
    const std::size_t N = probs.rows();
    if (N == 0)
        throw std::invalid_argument("expected_calibration_error: empty input");
    if (labels.size() != N || bins < 1)
        throw std::invalid_argument("expected_calibration_error: bad input");

    std::vector<double> conf_sum(bins, 0.0), acc_sum(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    for (std::size_t r = 0; r < N; ++r) {
        const double* p = probs.row(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols(); ++c)
            if (p[c] > p[best]) best = c;
        const double conf = p[best];
        int b = static_cast<int>(conf * bins);
        if (b >= bins) b = bins - 1;  // conf == 1.0 lands in the last bin
        conf_sum[b] += conf;
        acc_sum[b] += (static_cast<int>(best) == labels[r]) ? 1.0 : 0.0;
        ++count[b];
    }
    double ece = 0.0;
    for (int b = 0; b < bins; ++b) {
        if (count[b] == 0) continue;
        const double w = static_cast<double>(count[b]) / N;
        ece += w * std::abs(acc_sum[b] / count[b] - conf_sum[b] / count[b]);
    }
    return ece;
}

std::string CLReport::to_json() const {
    nlohmann::ordered_json j;
    j["mean_accuracy_per_step"] = mean_accuracy_per_step;
    if (stability_plasticity) {
        j["stability"] = stability_plasticity->stability;
        j["plasticity"] = stability_plasticity->plasticity;
        j["tradeoff"] = stability_plasticity->tradeoff;
    }
    if (!stability_per_step.empty())
        j["stability_per_step"] = stability_per_step;
    if (recency_bias) j["recency_bias"] = *recency_bias;
    if (ece) j["ece"] = *ece;
    return j.dump(2);
}

}  // namespace mmcl
