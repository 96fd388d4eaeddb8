#include "mmcl/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace mmcl {

const char* inference_mode_name(InferenceMode mode) {
    switch (mode) {
        case InferenceMode::Audio: return "audio";
        case InferenceMode::Visual: return "visual";
        case InferenceMode::Multi: return "multi";
        case InferenceMode::Dynamic: return "dynamic";
    }
    return "?";
}

InferenceMode inference_mode_from(const std::string& name) {
    if (name == "audio") return InferenceMode::Audio;
    if (name == "visual") return InferenceMode::Visual;
    if (name == "multi") return InferenceMode::Multi;
    if (name == "dynamic") return InferenceMode::Dynamic;
    throw std::invalid_argument("unknown inference mode '" + name + "'");
}

int argmax_lowest(const double* v, std::size_t n) {
    int best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (v[i] > v[best]) best = static_cast<int>(i);
    return best;
}

namespace {

void scaled_head(const std::vector<double>& z, double t,
                 std::vector<double>& scaled, double& weight) {
    const std::size_t n = z.size();
    scaled.resize(n);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = z[i] / t;
    std::vector<double> p(n);
    softmax_row(scaled.data(), p.data(), n);
    weight = *std::max_element(p.begin(), p.end());
}

}  // namespace

std::vector<double> dynamic_ensemble(const std::vector<double>& z_a,
                                     const std::vector<double>& z_v,
                                     const std::vector<double>& z_av,
                                     const CalibrationState& cal,
                                     bool scale_logits) {
    const std::size_t n = z_av.size();
    if (z_a.size() != n || z_v.size() != n)
        throw std::invalid_argument("dynamic_ensemble: length mismatch");
    for (const auto* z : {&z_a, &z_v, &z_av})
        for (double x : *z)
            if (!std::isfinite(x))
                throw std::invalid_argument(
                    "dynamic_ensemble: non-finite logits");

    std::vector<double> sa, sv, sav;
    double wa, wv, wav;
    scaled_head(z_a, cal.t_a, sa, wa);
    scaled_head(z_v, cal.t_v, sv, wv);
    scaled_head(z_av, cal.t_av, sav, wav);

    const std::vector<double>& ea = scale_logits ? sa : z_a;
    const std::vector<double>& ev = scale_logits ? sv : z_v;
    const std::vector<double>& eav = scale_logits ? sav : z_av;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = wa * ea[i] + wv * ev[i] + wav * eav[i];
    return out;
}

Mat predict_scores(const ModelBundle& bundle, const BatchOutput& out,
                   InferenceMode mode, bool ensemble_scale_logits) {
    const std::size_t B = out.batch_size();
    const std::size_t C = out.z_av.cols();
    Mat scores(B, C);
    const CalibrationState cal{bundle.t_a, bundle.t_v, bundle.t_av};
    for (std::size_t r = 0; r < B; ++r) {
        double* dst = scores.row(r);
        switch (mode) {
            case InferenceMode::Audio:
                for (std::size_t c = 0; c < C; ++c)
                    dst[c] = out.z_a.row(r)[c] / bundle.t_a;
                break;
            case InferenceMode::Visual:
                for (std::size_t c = 0; c < C; ++c)
                    dst[c] = out.z_v.row(r)[c] / bundle.t_v;
                break;
            case InferenceMode::Multi:
                for (std::size_t c = 0; c < C; ++c)
                    dst[c] = out.z_av.row(r)[c] / bundle.t_av;
                break;
            case InferenceMode::Dynamic: {
                std::vector<double> za(out.z_a.row(r), out.z_a.row(r) + C);
                std::vector<double> zv(out.z_v.row(r), out.z_v.row(r) + C);
                std::vector<double> zav(out.z_av.row(r), out.z_av.row(r) + C);
                const auto zo =
                    dynamic_ensemble(za, zv, zav, cal, ensemble_scale_logits);
                std::copy(zo.begin(), zo.end(), dst);
                break;
            }
        }
    }
    return scores;
}

Prediction predict(const ModelBundle& bundle, const PairedExample& example,
                   InferenceMode mode, bool ensemble_scale_logits) {
    Mat audio(1, example.audio.size());
    Mat visual(1, example.visual.size());
    std::copy(example.audio.begin(), example.audio.end(), audio.data());
    std::copy(example.visual.begin(), example.visual.end(), visual.data());
    const BatchOutput out =
        forward(bundle, std::move(audio), std::move(visual));
    Mat scores = predict_scores(bundle, out, mode, ensemble_scale_logits);
    Prediction p;
    p.scores.assign(scores.row(0), scores.row(0) + scores.cols());
    p.label = argmax_lowest(p.scores.data(), p.scores.size());
    return p;
}

double nll_at_temperature(const Mat& logits, const std::vector<int>& labels,
                          double temperature) {
    const std::size_t B = logits.rows();
    const std::size_t C = logits.cols();
    std::vector<double> scaled(C);
    double nll = 0.0;
    for (std::size_t r = 0; r < B; ++r) {
        const double* z = logits.row(r);
        for (std::size_t c = 0; c < C; ++c) scaled[c] = z[c] / temperature;
        nll += log_sum_exp(scaled.data(), C) - scaled[labels[r]];
    }
    return nll / static_cast<double>(B);
}

// Coarse 64-point grid over log T in [-3, 3], then golden-section
// refinement between the best point's neighbors. T = 1 is always a
// candidate so calibration can never hurt the NLL.
double fit_temperature(const Mat& logits, const std::vector<int>& labels) {
    constexpr int kGrid = 64;
    constexpr double kLo = -3.0, kHi = 3.0;
    auto nll_log = [&](double logt) {
        return nll_at_temperature(logits, labels, std::exp(logt));
    };

    int best = 0;
    double best_val = nll_log(kLo);
    for (int i = 1; i < kGrid; ++i) {
        const double x = kLo + (kHi - kLo) * i / (kGrid - 1);
        const double v = nll_log(x);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    const double step = (kHi - kLo) / (kGrid - 1);
    double a = kLo + step * std::max(0, best - 1);
    double b = kLo + step * std::min(kGrid - 1, best + 1);

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = nll_log(c), fd = nll_log(d);
    while (b - a > 1e-4) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = nll_log(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = nll_log(d);
        }
    }
    const double logt = 0.5 * (a + b);
    const double t = std::exp(logt);
    return nll_at_temperature(logits, labels, t) <=
                   nll_at_temperature(logits, labels, 1.0)
               ? t
               : 1.0;
}

CalibrationState calibrate(ModelBundle& bundle,
                           const std::vector<BufferEntry>& entries) {
    if (entries.empty()) {
        std::cerr << "warning: calibrate: empty buffer, temperatures "
                     "unchanged\n";
        return {bundle.t_a, bundle.t_v, bundle.t_av};
    }
    const std::size_t B = entries.size();
    Mat audio(B, entries[0].audio.size());
    Mat visual(B, entries[0].visual.size());
    std::vector<int> labels(B);
    for (std::size_t i = 0; i < B; ++i) {
        std::copy(entries[i].audio.begin(), entries[i].audio.end(),
                  audio.row(i));
        std::copy(entries[i].visual.begin(), entries[i].visual.end(),
                  visual.row(i));
        labels[i] = entries[i].label;
    }
    const BatchOutput out =
        forward(bundle, std::move(audio), std::move(visual));

    bundle.t_a = fit_temperature(out.z_a, labels);
    bundle.t_v = fit_temperature(out.z_v, labels);
    bundle.t_av = fit_temperature(out.z_av, labels);
    return {bundle.t_a, bundle.t_v, bundle.t_av};
}

}  // namespace mmcl
