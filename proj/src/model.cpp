#include "mmcl/model.hpp"

#include <bit>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mmcl/kernels.hpp"

namespace mmcl {

namespace k = kernels;

namespace {

Linear make_linear(int in, int out) {
    Linear l;
    l.w = Mat(static_cast<std::size_t>(out), static_cast<std::size_t>(in));
    l.b.assign(static_cast<std::size_t>(out), 0.0);
    return l;
}

void init_linear(Linear& l, Rng rng) {
    rng.fill_normal(l.w.data(), l.w.size());
    k::scale(1.0 / std::sqrt(static_cast<double>(l.in())), l.w.data(),
             l.w.size());
}

Mat linear_forward(const Linear& l, const Mat& x) {
    assert(static_cast<int>(x.cols()) == l.in());
    Mat y(x.rows(), static_cast<std::size_t>(l.out()));
    k::matmul_nt(x.data(), l.w.data(), y.data(), x.rows(), x.cols(),
                 y.cols());
    k::add_row_vector(y.data(), l.b.data(), y.rows(), y.cols());
    return y;
}

// dx (if non-null) and the parameter gradients are accumulated.
void linear_backward(const Linear& l, const Mat& x, const Mat& dy, Mat* dx,
                     Linear* g) {
    if (g) {
        k::matmul_tn_acc(dy.data(), x.data(), g->w.data(), dy.rows(),
                         dy.cols(), x.cols());
        k::col_sums_acc(dy.data(), g->b.data(), dy.rows(), dy.cols());
    }
    if (dx)
        k::matmul_nn_acc(dy.data(), l.w.data(), dx->data(), dy.rows(),
                         dy.cols(), dx->cols());
}

int scaled_width(int base, double multiplier) {
    const int w = static_cast<int>(std::ceil(base * multiplier));
    return w < 1 ? 1 : w;
}

struct LayerRef {
    const char* name;
    Linear ModelBundle::* member;
};

constexpr LayerRef kLayers[] = {
    {"enc_a1", &ModelBundle::enc_a1}, {"enc_a2", &ModelBundle::enc_a2},
    {"enc_v1", &ModelBundle::enc_v1}, {"enc_v2", &ModelBundle::enc_v2},
    {"film", &ModelBundle::film},     {"fuse", &ModelBundle::fuse},
    {"head_a", &ModelBundle::head_a}, {"head_v", &ModelBundle::head_v},
    {"head_av", &ModelBundle::head_av},
};

constexpr Linear Gradients::* kGradLayers[] = {
    &Gradients::enc_a1, &Gradients::enc_a2, &Gradients::enc_v1,
    &Gradients::enc_v2, &Gradients::film,   &Gradients::fuse,
    &Gradients::head_a, &Gradients::head_v, &Gradients::head_av,
};

}  // namespace

void Gradients::zero() {
    for (auto m : kGradLayers) {
        (this->*m).w.fill(0.0);
        std::fill((this->*m).b.begin(), (this->*m).b.end(), 0.0);
    }
}

ModelBundle init_model(const ModelConfig& config) {
    if (config.dim_audio < 1 || config.dim_visual < 1 ||
        config.num_classes < 1 || config.hidden_dim < 1 ||
        config.feature_dim < 1 || !(config.width_multiplier > 0.0))
        throw std::invalid_argument("init_model: invalid config");

    ModelBundle b;
    b.config = config;
    b.hidden = scaled_width(config.hidden_dim, config.width_multiplier);
    b.feature = scaled_width(config.feature_dim, config.width_multiplier);

    b.enc_a1 = make_linear(config.dim_audio, b.hidden);
    b.enc_a2 = make_linear(b.hidden, b.feature);
    b.enc_v1 = make_linear(config.dim_visual, b.hidden);
    b.enc_v2 = make_linear(b.hidden, b.feature);
    b.film = make_linear(b.feature, 2 * b.feature);
    b.fuse = make_linear(b.feature, b.feature);
    b.head_a = make_linear(b.feature, config.num_classes);
    b.head_v = make_linear(b.feature, config.num_classes);
    b.head_av = make_linear(b.feature, config.num_classes);

    Rng root(config.seed);
    std::uint64_t tag = 0;
    for (auto layer : kLayers) init_linear(b.*(layer.member), root.fork(tag++));
    return b;
}

std::size_t param_count(const ModelBundle& b) {
    std::size_t n = 0;
    for (auto layer : kLayers) n += (b.*(layer.member)).param_count();
    return n;
}

Gradients make_gradients(const ModelBundle& b) {
    Gradients g;
    for (std::size_t i = 0; i < std::size(kLayers); ++i) {
        const Linear& src = b.*(kLayers[i].member);
        g.*(kGradLayers[i]) = make_linear(src.in(), src.out());
    }
    return g;
}

void fuse_forward(const ModelBundle& b, const Mat& f_a, const Mat& f_v,
                  Mat& gamma, Mat& delta, Mat& fused_pre, Mat& f_av) {
    const Mat& cond = b.config.film_audio_conditions_visual ? f_a : f_v;
    const Mat& other = b.config.film_audio_conditions_visual ? f_v : f_a;
    const std::size_t B = cond.rows();
    const std::size_t F = static_cast<std::size_t>(b.feature);

    Mat g2 = linear_forward(b.film, cond);
    gamma = Mat(B, F);
    delta = Mat(B, F);
    for (std::size_t r = 0; r < B; ++r) {
        const double* src = g2.row(r);
        std::copy(src, src + F, gamma.row(r));
        std::copy(src + F, src + 2 * F, delta.row(r));
    }
    fused_pre = Mat(B, F);
    k::mul_add_vec(gamma.data(), other.data(), delta.data(), fused_pre.data(),
                   B * F);
    f_av = linear_forward(b.fuse, fused_pre);
}

void fuse_backward(const ModelBundle& b, const Mat& f_a, const Mat& f_v,
                   const Mat& gamma, const Mat& fused_pre, const Mat& df_av,
                   Mat& df_a, Mat& df_v, Gradients* grads) {
    const Mat& other = b.config.film_audio_conditions_visual ? f_v : f_a;
    Mat& dcond = b.config.film_audio_conditions_visual ? df_a : df_v;
    Mat& dother = b.config.film_audio_conditions_visual ? df_v : df_a;
    const std::size_t B = other.rows();
    const std::size_t F = static_cast<std::size_t>(b.feature);

    Mat dpre(B, F);
    dpre.fill(0.0);
    linear_backward(b.fuse, fused_pre, df_av, &dpre,
                    grads ? &grads->fuse : nullptr);

    // fused_pre = gamma (.) other + delta
    Mat dg2(B, 2 * F);
    for (std::size_t r = 0; r < B; ++r) {
        double* dst = dg2.row(r);
        k::mul_vec(dpre.row(r), other.row(r), dst, F);       // dgamma
        std::copy(dpre.row(r), dpre.row(r) + F, dst + F);    // ddelta
    }
    Mat dother_local(B, F);
    k::mul_vec(dpre.data(), gamma.data(), dother_local.data(), B * F);
    k::axpy(1.0, dother_local.data(), dother.data(), B * F);

    const Mat& cond = b.config.film_audio_conditions_visual ? f_a : f_v;
    linear_backward(b.film, cond, dg2, &dcond,
                    grads ? &grads->film : nullptr);
}

BatchOutput forward(const ModelBundle& b, Mat audio, Mat visual) {
    if (audio.rows() == 0 || audio.rows() != visual.rows())
        throw std::invalid_argument("forward: empty or mismatched batch");
    if (static_cast<int>(audio.cols()) != b.config.dim_audio ||
        static_cast<int>(visual.cols()) != b.config.dim_visual)
        throw std::invalid_argument("forward: input dims do not match model");

    BatchOutput o;
    o.xa = std::move(audio);
    o.xv = std::move(visual);

    o.ha = linear_forward(b.enc_a1, o.xa);
    k::tanh_vec(o.ha.data(), o.ha.data(), o.ha.size());
    o.f_a = linear_forward(b.enc_a2, o.ha);

    o.hv = linear_forward(b.enc_v1, o.xv);
    k::tanh_vec(o.hv.data(), o.hv.data(), o.hv.size());
    o.f_v = linear_forward(b.enc_v2, o.hv);

    fuse_forward(b, o.f_a, o.f_v, o.gamma, o.delta, o.fused_pre, o.f_av);

    o.z_a = linear_forward(b.head_a, o.f_a);
    o.z_v = linear_forward(b.head_v, o.f_v);
    o.z_av = linear_forward(b.head_av, o.f_av);
    return o;
}

void backward(const ModelBundle& b, const BatchOutput& o, const Mat& dz_a,
              const Mat& dz_v, const Mat& dz_av, const Mat& df_a_extra,
              const Mat& df_v_extra, Gradients& g) {
    const std::size_t B = o.batch_size();
    const std::size_t F = static_cast<std::size_t>(b.feature);

    Mat df_a(B, F), df_v(B, F);
    df_a.fill(0.0);
    df_v.fill(0.0);
    if (!df_a_extra.empty())
        k::axpy(1.0, df_a_extra.data(), df_a.data(), df_a.size());
    if (!df_v_extra.empty())
        k::axpy(1.0, df_v_extra.data(), df_v.data(), df_v.size());

    if (!dz_a.empty()) linear_backward(b.head_a, o.f_a, dz_a, &df_a, &g.head_a);
    if (!dz_v.empty()) linear_backward(b.head_v, o.f_v, dz_v, &df_v, &g.head_v);
    if (!dz_av.empty()) {
        Mat df_av(B, F);
        df_av.fill(0.0);
        linear_backward(b.head_av, o.f_av, dz_av, &df_av, &g.head_av);
        fuse_backward(b, o.f_a, o.f_v, o.gamma, o.fused_pre, df_av, df_a, df_v,
                      &g);
    }

    // Audio encoder.
    Mat dha(B, static_cast<std::size_t>(b.hidden));
    dha.fill(0.0);
    linear_backward(b.enc_a2, o.ha, df_a, &dha, &g.enc_a2);
    Mat dha_pre(B, static_cast<std::size_t>(b.hidden));
    dha_pre.fill(0.0);
    k::tanh_backward_acc(o.ha.data(), dha.data(), dha_pre.data(), dha.size());
    linear_backward(b.enc_a1, o.xa, dha_pre, nullptr, &g.enc_a1);

    // Visual encoder.
    Mat dhv(B, static_cast<std::size_t>(b.hidden));
    dhv.fill(0.0);
    linear_backward(b.enc_v2, o.hv, df_v, &dhv, &g.enc_v2);
    Mat dhv_pre(B, static_cast<std::size_t>(b.hidden));
    dhv_pre.fill(0.0);
    k::tanh_backward_acc(o.hv.data(), dhv.data(), dhv_pre.data(), dhv.size());
    linear_backward(b.enc_v1, o.xv, dhv_pre, nullptr, &g.enc_v1);
}

void sgd_update(ModelBundle& b, const Gradients& g, double lr) {
    for (std::size_t i = 0; i < std::size(kLayers); ++i) {
        Linear& p = b.*(kLayers[i].member);
        const Linear& gr = g.*(kGradLayers[i]);
        k::sgd_step(p.w.data(), gr.w.data(), lr, p.w.size());
        k::sgd_step(p.b.data(), gr.b.data(), lr, p.b.size());
    }
}

// ---------------------------------------------------------------------------
// Save / load
// ---------------------------------------------------------------------------

namespace {

using nlohmann::ordered_json;

void write_doubles_le(std::ostream& os, const double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(v[i]);
        unsigned char b[8];
        for (int j = 0; j < 8; ++j)
            b[j] = static_cast<unsigned char>((bits >> (8 * j)) & 0xff);
        os.write(reinterpret_cast<const char*>(b), 8);
    }
}

void read_doubles_le(std::istream& is, double* v, std::size_t n,
                     const std::string& what) {
    for (std::size_t i = 0; i < n; ++i) {
        unsigned char b[8];
        if (!is.read(reinterpret_cast<char*>(b), 8))
            throw std::runtime_error("truncated parameter blob in " + what);
        std::uint64_t bits = 0;
        for (int j = 0; j < 8; ++j)
            bits |= static_cast<std::uint64_t>(b[j]) << (8 * j);
        v[i] = std::bit_cast<double>(bits);
    }
}

}  // namespace

void save_bundle(const ModelBundle& b, const std::filesystem::path& prefix) {
    ordered_json j;
    j["config"] = {
        {"dim_audio", b.config.dim_audio},
        {"dim_visual", b.config.dim_visual},
        {"num_classes", b.config.num_classes},
        {"hidden_dim", b.config.hidden_dim},
        {"feature_dim", b.config.feature_dim},
        {"width_multiplier", b.config.width_multiplier},
        {"film_audio_conditions_visual", b.config.film_audio_conditions_visual},
        {"seed", b.config.seed},
    };
    j["hidden"] = b.hidden;
    j["feature"] = b.feature;
    j["temperatures"] = {b.t_a, b.t_v, b.t_av};
    j["layers"] = ordered_json::array();
    for (auto layer : kLayers) {
        const Linear& l = b.*(layer.member);
        j["layers"].push_back(
            {{"name", layer.name}, {"in", l.in()}, {"out", l.out()}});
    }
    std::ofstream mos(prefix.string() + ".json");
    if (!mos)
        throw std::runtime_error("cannot write " + prefix.string() + ".json");
    mos << j.dump(2) << "\n";

    std::ofstream bos(prefix.string() + ".bin", std::ios::binary);
    if (!bos)
        throw std::runtime_error("cannot write " + prefix.string() + ".bin");
    for (auto layer : kLayers) {
        const Linear& l = b.*(layer.member);
        write_doubles_le(bos, l.w.data(), l.w.size());
        write_doubles_le(bos, l.b.data(), l.b.size());
    }
}

ModelBundle load_bundle(const std::filesystem::path& prefix) {
    std::ifstream mis(prefix.string() + ".json");
    if (!mis)
        throw std::runtime_error("cannot open " + prefix.string() + ".json");
    ordered_json j = ordered_json::parse(mis);

    ModelConfig c;
    const auto& jc = j.at("config");
    c.dim_audio = jc.at("dim_audio").get<int>();
    c.dim_visual = jc.at("dim_visual").get<int>();
    c.num_classes = jc.at("num_classes").get<int>();
    c.hidden_dim = jc.at("hidden_dim").get<int>();
    c.feature_dim = jc.at("feature_dim").get<int>();
    c.width_multiplier = jc.at("width_multiplier").get<double>();
    c.film_audio_conditions_visual =
        jc.at("film_audio_conditions_visual").get<bool>();
    c.seed = jc.at("seed").get<std::uint64_t>();

    ModelBundle b = init_model(c);
    if (b.hidden != j.at("hidden").get<int>() ||
        b.feature != j.at("feature").get<int>())
        throw std::runtime_error("bundle manifest widths do not match config");
    const auto temps = j.at("temperatures");
    b.t_a = temps.at(0).get<double>();
    b.t_v = temps.at(1).get<double>();
    b.t_av = temps.at(2).get<double>();

    const auto& layers = j.at("layers");
    if (layers.size() != std::size(kLayers))
        throw std::runtime_error("bundle manifest layer count mismatch");
    std::ifstream bis(prefix.string() + ".bin", std::ios::binary);
    if (!bis)
        throw std::runtime_error("cannot open " + prefix.string() + ".bin");
    for (std::size_t i = 0; i < std::size(kLayers); ++i) {
        Linear& l = b.*(kLayers[i].member);
        const auto& lj = layers.at(i);
        if (lj.at("name").get<std::string>() != kLayers[i].name ||
            lj.at("in").get<int>() != l.in() ||
            lj.at("out").get<int>() != l.out())
            throw std::runtime_error("bundle manifest layer shape mismatch at " +
                                     std::string(kLayers[i].name));
        read_doubles_le(bis, l.w.data(), l.w.size(), prefix.string());
        read_doubles_le(bis, l.b.data(), l.b.size(), prefix.string());
    }
    char extra;
    if (bis.read(&extra, 1))
        throw std::runtime_error("trailing bytes in " + prefix.string() +
                                 ".bin");
    return b;
}

}  // namespace mmcl
