#include "mmcl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "mmcl/kernels.hpp"

namespace mmcl {

namespace k = kernels;

double log_sum_exp(const double* z, std::size_t n) {
    double m = z[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, z[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(z[i] - m);
    return m + std::log(s);
}

void softmax_row(const double* z, double* p, std::size_t n) {
    const double lse = log_sum_exp(z, n);
    for (std::size_t i = 0; i < n; ++i) p[i] = std::exp(z[i] - lse);
}

double softmax_cross_entropy(const Mat& z, const std::vector<int>& labels,
                             Mat* dz, double grad_scale) {
    const std::size_t B = z.rows();
    const std::size_t C = z.cols();
    if (labels.size() != B)
        throw std::invalid_argument("cross_entropy: label count != batch");
    double loss = 0.0;
    std::vector<double> p(C);
    for (std::size_t r = 0; r < B; ++r) {
        const int y = labels[r];
        if (y < 0 || static_cast<std::size_t>(y) >= C)
            throw std::invalid_argument("cross_entropy: label out of range");
        const double* zr = z.row(r);
        const double lse = log_sum_exp(zr, C);
        loss += lse - zr[y];
        if (dz) {
            double* d = dz->row(r);
            const double s = grad_scale / static_cast<double>(B);
            for (std::size_t c = 0; c < C; ++c)
                d[c] += s * std::exp(zr[c] - lse);
            d[y] -= s;
        }
    }
    return loss / static_cast<double>(B);
}

double supervised_loss(const Mat& z_a, const Mat& z_v, const Mat& z_av,
                       const std::vector<int>& labels, double lambda,
                       Mat* dz_a, Mat* dz_v, Mat* dz_av, double grad_scale) {
    const double ce_av = softmax_cross_entropy(z_av, labels, dz_av, grad_scale);
    const double ce_a =
        softmax_cross_entropy(z_a, labels, dz_a, grad_scale * lambda);
    const double ce_v =
        softmax_cross_entropy(z_v, labels, dz_v, grad_scale * lambda);
    return ce_av + lambda * (ce_a + ce_v);
}

int select_reference_head(const double* z_a, const double* z_v,
                          const double* z_av, int label, std::size_t n,
                          bool restrict_to_unimodal) {
    auto score = [&](const double* z) {
        return z[label] - log_sum_exp(z, n);  // log softmax at the label
    };
    int best;
    double best_score;
    if (restrict_to_unimodal) {
        best = 1;
        best_score = score(z_a);
    } else {
        best = 0;
        best_score = score(z_av);
        const double sa = score(z_a);
        if (sa > best_score) {
            best = 1;
            best_score = sa;
        }
    }
    const double sv = score(z_v);
    if (sv > best_score) best = 2;
    return best;
}

namespace {

double mse_term(const Mat& z, const Mat& r, Mat* dz, double grad_scale) {
    const std::size_t n = z.size();
    const double inv = 1.0 / static_cast<double>(n);
    double acc = 0.0;
    const double* zp = z.data();
    const double* rp = r.data();
    double* dp = dz ? dz->data() : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = zp[i] - rp[i];
        acc += diff * diff;
        if (dp) dp[i] += grad_scale * 2.0 * diff * inv;
    }
    return acc * inv;
}

}  // namespace

double consistency_loss(const Mat& z_a, const Mat& z_v, const Mat& z_av,
                        const Mat& z_r, double lambda, Mat* dz_a, Mat* dz_v,
                        Mat* dz_av, double grad_scale) {
    if (z_a.rows() != z_r.rows() || z_a.cols() != z_r.cols() ||
        z_v.rows() != z_r.rows() || z_av.rows() != z_r.rows())
        throw std::invalid_argument("consistency_loss: shape mismatch");
    const double m_av = mse_term(z_av, z_r, dz_av, grad_scale);
    const double m_a = mse_term(z_a, z_r, dz_a, grad_scale * lambda);
    const double m_v = mse_term(z_v, z_r, dz_v, grad_scale * lambda);
    return m_av + lambda * (m_a + m_v);
}

namespace {

inline double huber(double x) {
    const double ax = std::abs(x);
    return ax <= 1.0 ? 0.5 * x * x : ax - 0.5;
}

inline double huber_grad(double x) {
    return std::abs(x) <= 1.0 ? x : (x > 0.0 ? 1.0 : -1.0);
}

}  // namespace

double feature_alignment_loss(const Mat& f_a, const Mat& f_v, Mat* df_a,
                              Mat* df_v, double grad_scale) {
    const std::size_t B = f_a.rows();
    if (B < 2)
        throw std::invalid_argument("feature_alignment_loss: batch < 2");
    if (f_v.rows() != B || f_a.cols() != f_v.cols())
        throw std::invalid_argument(
            "feature_alignment_loss: feature shape mismatch");
    const std::size_t D = f_a.cols();
    const std::size_t P = B * (B - 1) / 2;

    std::vector<double> d_a(P), d_v(P);
    std::size_t p = 0;
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = i + 1; j < B; ++j, ++p) {
            d_a[p] = std::sqrt(k::sq_dist(f_a.row(i), f_a.row(j), D));
            d_v[p] = std::sqrt(k::sq_dist(f_v.row(i), f_v.row(j), D));
        }
    }

    double mu_a = k::sum(d_a.data(), P) / static_cast<double>(P);
    double mu_v = k::sum(d_v.data(), P) / static_cast<double>(P);
    const bool clamped_a = mu_a == 0.0;
    const bool clamped_v = mu_v == 0.0;
    if (clamped_a || clamped_v) {
        std::cerr << "warning: feature_alignment_loss: degenerate batch "
                     "(all pairwise distances zero), using mu = 1\n";
        if (clamped_a) mu_a = 1.0;
        if (clamped_v) mu_v = 1.0;
    }

    double loss = 0.0;
    std::vector<double> g(P);
    for (std::size_t q = 0; q < P; ++q) {
        const double delta = d_a[q] / mu_a - d_v[q] / mu_v;
        loss += huber(delta);
        g[q] = huber_grad(delta) / static_cast<double>(P);
    }
    loss /= static_cast<double>(P);

    if (!df_a && !df_v) return loss;

    // d(loss)/d(distance) per pair for each side; the normalizer mu is a
    // function of the distances unless it was clamped.
    auto distance_grads = [&](const std::vector<double>& d, double mu,
                              bool clamped, double sign) {
        std::vector<double> dd(P);
        double coupling = 0.0;
        if (!clamped) {
            for (std::size_t q = 0; q < P; ++q)
                coupling += sign * g[q] * (d[q] / mu);
            coupling /= static_cast<double>(P);
        }
        for (std::size_t q = 0; q < P; ++q)
            dd[q] = (sign * g[q] - coupling) / mu;
        return dd;
    };
    const auto dd_a = distance_grads(d_a, mu_a, clamped_a, 1.0);
    const auto dd_v = distance_grads(d_v, mu_v, clamped_v, -1.0);

    auto scatter = [&](const Mat& f, const std::vector<double>& d,
                       const std::vector<double>& dd, Mat* df) {
        if (!df) return;
        std::size_t q = 0;
        for (std::size_t i = 0; i < B; ++i) {
            for (std::size_t j = i + 1; j < B; ++j, ++q) {
                if (d[q] == 0.0) continue;
                const double c = grad_scale * dd[q] / d[q];
                const double* fi = f.row(i);
                const double* fj = f.row(j);
                double* gi = df->row(i);
                double* gj = df->row(j);
                for (std::size_t x = 0; x < D; ++x) {
                    const double diff = c * (fi[x] - fj[x]);
                    gi[x] += diff;
                    gj[x] -= diff;
                }
            }
        }
    };
    scatter(f_a, d_a, dd_a, df_a);
    scatter(f_v, d_v, dd_v, df_v);
    return loss;
}

LossBreakdown total_loss(const ModelBundle& bundle, const TaskBatch& task,
                         const BufferBatch& buffer, const LossWeights& weights,
                         Gradients* grads, bool restrict_reference_to_unimodal,
                         BatchOutput* task_out) {
    LossBreakdown out;
    const std::size_t C = static_cast<std::size_t>(bundle.config.num_classes);

    auto run_batch = [&](const Mat& audio, const Mat& visual,
                         const std::vector<int>& labels, const BufferBatch* buf,
                         double& supervised_slot, double& alignment_slot,
                         BatchOutput* keep) {
        BatchOutput o = forward(bundle, audio, visual);
        const std::size_t B = o.batch_size();
        Mat dz_a, dz_v, dz_av, df_a, df_v;
        if (grads) {
            dz_a = Mat(B, C);
            dz_v = Mat(B, C);
            dz_av = Mat(B, C);
            dz_a.fill(0.0);
            dz_v.fill(0.0);
            dz_av.fill(0.0);
            df_a = Mat(B, o.f_a.cols());
            df_v = Mat(B, o.f_v.cols());
            df_a.fill(0.0);
            df_v.fill(0.0);
        }
        Mat* pz_a = grads ? &dz_a : nullptr;
        Mat* pz_v = grads ? &dz_v : nullptr;
        Mat* pz_av = grads ? &dz_av : nullptr;

        supervised_slot = supervised_loss(o.z_a, o.z_v, o.z_av, labels,
                                          weights.lambda, pz_a, pz_v, pz_av);
        if (buf) {
            Mat z_r(B, C);
            for (std::size_t r = 0; r < B; ++r) {
                const int head = select_reference_head(
                    buf->z_a.row(r), buf->z_v.row(r), buf->z_av.row(r),
                    labels[r], C, restrict_reference_to_unimodal);
                const double* src = head == 0   ? buf->z_av.row(r)
                                    : head == 1 ? buf->z_a.row(r)
                                                : buf->z_v.row(r);
                std::copy(src, src + C, z_r.row(r));
            }
            out.consistency =
                consistency_loss(o.z_a, o.z_v, o.z_av, z_r, weights.lambda,
                                 pz_a, pz_v, pz_av, weights.beta);
        }
        // Alignment needs at least one pair; a singleton batch contributes 0.
        if (B >= 2) {
            alignment_slot = feature_alignment_loss(
                o.f_a, o.f_v, grads ? &df_a : nullptr,
                grads ? &df_v : nullptr);
        }
        if (grads) backward(bundle, o, dz_a, dz_v, dz_av, df_a, df_v, *grads);
        if (keep) *keep = std::move(o);
    };

    run_batch(task.audio, task.visual, task.labels, nullptr,
              out.supervised_task, out.alignment_task, task_out);
    if (!buffer.empty()) {
        run_batch(buffer.audio, buffer.visual, buffer.labels, &buffer,
                  out.supervised_buffer, out.alignment_buffer, nullptr);
    }
    return out;
}

}  // namespace mmcl
