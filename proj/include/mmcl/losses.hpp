#pragma once

#include <cstddef>
#include <vector>

#include "mmcl/mat.hpp"
#include "mmcl/model.hpp"

namespace mmcl {

struct LossWeights {
    double lambda = 0.01;  // unimodal-head weight
    double beta = 1.0;     // consistency strength
};

// Numerically stable softmax helpers shared across losses and inference.
double log_sum_exp(const double* z, std::size_t n);
void softmax_row(const double* z, double* p, std::size_t n);

// Batch-mean cross entropy over softmax. When dz is non-null, accumulates
// grad_scale * d(loss)/dz into it.
double softmax_cross_entropy(const Mat& z, const std::vector<int>& labels,
                             Mat* dz = nullptr, double grad_scale = 1.0);

// CE(z_av) + lambda * (CE(z_a) + CE(z_v)).
double supervised_loss(const Mat& z_a, const Mat& z_v, const Mat& z_av,
                       const std::vector<int>& labels, double lambda,
                       Mat* dz_a = nullptr, Mat* dz_v = nullptr,
                       Mat* dz_av = nullptr, double grad_scale = 1.0);

// Index of the stored head whose softmax score at `label` is highest;
// ties resolve in the order av, a, v. 0 = av, 1 = a, 2 = v.
int select_reference_head(const double* z_a, const double* z_v,
                          const double* z_av, int label, std::size_t n,
                          bool restrict_to_unimodal = false);

// MSE(z_av, z_r) + lambda * (MSE(z_a, z_r) + MSE(z_v, z_r)), each MSE a
// mean over batch and classes.
double consistency_loss(const Mat& z_a, const Mat& z_v, const Mat& z_av,
                        const Mat& z_r, double lambda, Mat* dz_a = nullptr,
                        Mat* dz_v = nullptr, Mat* dz_av = nullptr,
                        double grad_scale = 1.0);

// Distance-wise alignment of the two feature spaces: normalized pairwise
// distances compared with a Huber penalty (threshold 1), averaged over all
// unordered pairs. Gradients are accumulated when df_* are non-null.
double feature_alignment_loss(const Mat& f_a, const Mat& f_v,
                              Mat* df_a = nullptr, Mat* df_v = nullptr,
                              double grad_scale = 1.0);

struct LossBreakdown {
    double supervised_task = 0.0;
    double supervised_buffer = 0.0;
    double consistency = 0.0;
    double alignment_task = 0.0;
    double alignment_buffer = 0.0;

    double total(double beta) const {
        return supervised_task + supervised_buffer + beta * consistency +
               alignment_task + alignment_buffer;
    }
};

struct TaskBatch {
    Mat audio;
    Mat visual;
    std::vector<int> labels;
};

struct BufferBatch {
    Mat audio;
    Mat visual;
    std::vector<int> labels;
    Mat z_a, z_v, z_av;  // logits stored at insertion time

    bool empty() const { return labels.empty(); }
};

// Combined objective: supervised task + supervised buffer + beta *
// consistency(buffer) + alignment(task) + alignment(buffer). An empty
// buffer batch contributes nothing. Gradients accumulate into `grads`
// when non-null. When task_out is non-null it receives the task batch
// forward pass (logits computed before any parameter update).
LossBreakdown total_loss(const ModelBundle& bundle, const TaskBatch& task,
                         const BufferBatch& buffer, const LossWeights& weights,
                         Gradients* grads,
                         bool restrict_reference_to_unimodal = false,
                         BatchOutput* task_out = nullptr);

}  // namespace mmcl
