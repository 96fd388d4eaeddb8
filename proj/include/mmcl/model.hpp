#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mmcl/mat.hpp"
#include "mmcl/rng.hpp"

namespace mmcl {

// Fully-connected layer, weights stored out x in so y = x * W^T + b.
struct Linear {
    Mat w;
    std::vector<double> b;

    int in() const { return static_cast<int>(w.cols()); }
    int out() const { return static_cast<int>(w.rows()); }
    std::size_t param_count() const { return w.size() + b.size(); }
};

struct ModelConfig {
    int dim_audio = 0;
    int dim_visual = 0;
    int num_classes = 0;
    int hidden_dim = 32;
    int feature_dim = 16;
    double width_multiplier = 1.0;
    // FiLM direction: which modality produces (gamma, delta).
    bool film_audio_conditions_visual = true;
    std::uint64_t seed = 0;
};

// Two 2-layer tanh MLP encoders, affine (FiLM) fusion, three linear heads.
struct ModelBundle {
    ModelConfig config;
    int hidden = 0;   // resolved encoder hidden width
    int feature = 0;  // resolved feature width (f_a, f_v, f_av)

    Linear enc_a1, enc_a2;
    Linear enc_v1, enc_v2;
    Linear film;  // feature -> 2*feature, emits (gamma, delta)
    Linear fuse;  // feature -> feature, after the affine modulation
    Linear head_a, head_v, head_av;

    double t_a = 1.0, t_v = 1.0, t_av = 1.0;
};

// Same tensor layout as the bundle, used to accumulate gradients.
struct Gradients {
    Linear enc_a1, enc_a2, enc_v1, enc_v2, film, fuse, head_a, head_v, head_av;

    void zero();
};

// Batch forward pass with every intermediate needed for backward.
struct BatchOutput {
    Mat xa, xv;          // inputs
    Mat ha, hv;          // post-tanh hidden activations
    Mat f_a, f_v;        // encoder features
    Mat gamma, delta;    // FiLM coefficients
    Mat fused_pre;       // gamma (.) conditioned + delta
    Mat f_av;            // fused feature
    Mat z_a, z_v, z_av;  // head logits

    std::size_t batch_size() const { return xa.rows(); }
};

ModelBundle init_model(const ModelConfig& config);
std::size_t param_count(const ModelBundle& bundle);
Gradients make_gradients(const ModelBundle& bundle);

BatchOutput forward(const ModelBundle& bundle, Mat audio, Mat visual);

// Accumulates parameter gradients given upstream gradients on the three
// logit blocks plus optional direct gradients on f_a / f_v (used by the
// feature-alignment loss). Empty mats mean zero upstream gradient.
void backward(const ModelBundle& bundle, const BatchOutput& out,
              const Mat& dz_a, const Mat& dz_v, const Mat& dz_av,
              const Mat& df_a_extra, const Mat& df_v_extra, Gradients& grads);

// Fusion alone, exposed for targeted gradient tests.
void fuse_forward(const ModelBundle& bundle, const Mat& f_a, const Mat& f_v,
                  Mat& gamma, Mat& delta, Mat& fused_pre, Mat& f_av);
void fuse_backward(const ModelBundle& bundle, const Mat& f_a, const Mat& f_v,
                   const Mat& gamma, const Mat& fused_pre, const Mat& df_av,
                   Mat& df_a, Mat& df_v, Gradients* grads);

void sgd_update(ModelBundle& bundle, const Gradients& grads, double lr);

// <prefix>.json carries shapes and temperatures, <prefix>.bin the raw
// parameters; round trip is bit-exact.
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& prefix);
ModelBundle load_bundle(const std::filesystem::path& prefix);

}  // namespace mmcl
