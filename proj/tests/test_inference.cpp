#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mmcl/inference.hpp"
#include "mmcl/losses.hpp"
#include "mmcl/rng.hpp"

using namespace mmcl;

namespace {

std::vector<double> naive_softmax(const std::vector<double>& z) {
    const double mx = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - mx);
        denom += p[i];
    }
    for (double& x : p) x /= denom;
    return p;
}

std::vector<double> naive_ensemble(const std::vector<double>& z_a,
                                   const std::vector<double>& z_v,
                                   const std::vector<double>& z_av,
                                   const CalibrationState& cal) {
    auto scaled = [](const std::vector<double>& z, double t) {
        std::vector<double> s(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) s[i] = z[i] / t;
        return s;
    };
    const auto ea = scaled(z_a, cal.t_a);
    const auto ev = scaled(z_v, cal.t_v);
    const auto eav = scaled(z_av, cal.t_av);
    auto weight = [&](const std::vector<double>& s) {
        const auto p = naive_softmax(s);
        return *std::max_element(p.begin(), p.end());
    };
    const double wa = weight(ea), wv = weight(ev), wav = weight(eav);
    std::vector<double> out(z_a.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = wa * ea[i] + wv * ev[i] + wav * eav[i];
    return out;
}

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 2.0) {
    std::vector<double> v(n);
    rng.fill_normal(v.data(), n, 0.0, scale);
    return v;
}

ModelBundle tiny_bundle(int classes = 3, std::uint64_t seed = 11) {
    ModelConfig c;
    c.dim_audio = 3;
    c.dim_visual = 2;
    c.num_classes = classes;
    c.hidden_dim = 4;
    c.feature_dim = 3;
    c.seed = seed;
    return init_model(c);
}

}  // namespace

TEST_SUITE_BEGIN("inference");

TEST_CASE("argmax breaks ties toward the lowest class id") {
    const double a[4] = {0.2, 0.9, 0.9, 0.1};
    CHECK(argmax_lowest(a, 4) == 1);
    const double b[3] = {0.5, 0.5, 0.5};
    CHECK(argmax_lowest(b, 3) == 0);
    const double c[1] = {-2.0};
    CHECK(argmax_lowest(c, 1) == 0);
}

TEST_CASE("ensemble of agreeing heads amplifies the shared vote") {
    // Two-class logits (2, 0) under every head at T = 1: each head's max
    // softmax is sigma(2) so the output is 3 * sigma(2) * (2, 0).
    const std::vector<double> z{2.0, 0.0};
    const CalibrationState cal;
    const auto out = dynamic_ensemble(z, z, z, cal);
    const double w = 1.0 / (1.0 + std::exp(-2.0));
    REQUIRE(out.size() == 2);
    CHECK(out[0] == doctest::Approx(3 * w * 2.0).epsilon(1e-14));
    CHECK(out[1] == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("ensemble hand example with one confident and two uncertain heads") {
    // Confident head (2, 0): weight sigma(2) ~ 0.8808. Flat heads (0, 0):
    // weight 0.5 each, contributing nothing to the gap. Output
    // ~ (1.7616, 0).
    const std::vector<double> confident{2.0, 0.0};
    const std::vector<double> flat{0.0, 0.0};
    const CalibrationState cal;
    const auto out = dynamic_ensemble(confident, flat, flat, cal);
    const double w = 1.0 / (1.0 + std::exp(-2.0));
    CHECK(out[0] == doctest::Approx(w * 2.0).epsilon(1e-12));
    CHECK(out[0] == doctest::Approx(1.7616).epsilon(1e-4));
    CHECK(out[1] == 0.0);
}

TEST_CASE("ensemble matches the naive oracle on random logits") {
    Rng rng(401);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 2 + rng.uniform_index(6);
        const auto z_a = random_vec(rng, n);
        const auto z_v = random_vec(rng, n);
        const auto z_av = random_vec(rng, n);
        CalibrationState cal;
        cal.t_a = 0.5 + rng.uniform();
        cal.t_v = 0.5 + rng.uniform();
        cal.t_av = 0.5 + rng.uniform();
        const auto got = dynamic_ensemble(z_a, z_v, z_av, cal);
        const auto want = naive_ensemble(z_a, z_v, z_av, cal);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < n; ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("raising a head's temperature damps its vote") {
    const std::vector<double> za{3.0, 0.0};
    const std::vector<double> zv{0.0, 2.0};
    const std::vector<double> zav{0.0, 0.0};
    CalibrationState cal;
    const auto base = dynamic_ensemble(za, zv, zav, cal);
    cal.t_a = 50.0;  // audio flattens toward zero weight and zero logits
    const auto damped = dynamic_ensemble(za, zv, zav, cal);
    CHECK(base[0] > base[1]);
    CHECK(damped[1] > damped[0]);
}

TEST_CASE("unscaled ensembling still weights by calibrated confidence") {
    const std::vector<double> za{4.0, 0.0};
    const std::vector<double> flat{0.0, 0.0};
    CalibrationState cal;
    cal.t_a = 2.0;
    const auto out = dynamic_ensemble(za, flat, flat, cal, false);
    // weight from softmax of (2, 0), applied to the raw (4, 0) logits
    const double w = 1.0 / (1.0 + std::exp(-2.0));
    CHECK(out[0] == doctest::Approx(w * 4.0).epsilon(1e-12));
}

TEST_CASE("ensemble rejects non-finite logits") {
    const std::vector<double> bad{std::numeric_limits<double>::infinity(), 0.0};
    const std::vector<double> ok{0.0, 0.0};
    CHECK_THROWS_AS(dynamic_ensemble(bad, ok, ok, CalibrationState{}),
                    std::invalid_argument);
}

TEST_CASE("predict_scores routes each mode to the right head") {
    const ModelBundle b = tiny_bundle();
    Rng rng(402);
    Mat audio(2, 3), visual(2, 2);
    rng.fill_normal(audio.data(), audio.size());
    rng.fill_normal(visual.data(), visual.size());
    const BatchOutput o = forward(b, audio, visual);

    const Mat sa = predict_scores(b, o, InferenceMode::Audio);
    const Mat sv = predict_scores(b, o, InferenceMode::Visual);
    const Mat sm = predict_scores(b, o, InferenceMode::Multi);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(sa.at(r, c) == o.z_a.at(r, c));
            CHECK(sv.at(r, c) == o.z_v.at(r, c));
            CHECK(sm.at(r, c) == o.z_av.at(r, c));
        }
}

TEST_CASE("predict_scores divides by installed temperatures") {
    ModelBundle b = tiny_bundle();
    b.t_a = 2.0;
    b.t_av = 4.0;
    Rng rng(403);
    Mat audio(1, 3), visual(1, 2);
    rng.fill_normal(audio.data(), audio.size());
    rng.fill_normal(visual.data(), visual.size());
    const BatchOutput o = forward(b, audio, visual);
    const Mat sa = predict_scores(b, o, InferenceMode::Audio);
    const Mat sm = predict_scores(b, o, InferenceMode::Multi);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(sa.at(0, c) == doctest::Approx(o.z_a.at(0, c) / 2.0));
        CHECK(sm.at(0, c) == doctest::Approx(o.z_av.at(0, c) / 4.0));
    }
}

TEST_CASE("dynamic prediction on a single example matches the batch path") {
    ModelBundle b = tiny_bundle();
    b.t_a = 1.3;
    b.t_v = 0.8;
    b.t_av = 1.1;
    Rng rng(404);
    PairedExample ex;
    ex.audio = random_vec(rng, 3, 1.0);
    ex.visual = random_vec(rng, 2, 1.0);

    const Prediction p = predict(b, ex, InferenceMode::Dynamic);

    Mat audio(1, 3), visual(1, 2);
    std::copy(ex.audio.begin(), ex.audio.end(), audio.data());
    std::copy(ex.visual.begin(), ex.visual.end(), visual.data());
    const BatchOutput o = forward(b, audio, visual);
    const Mat scores = predict_scores(b, o, InferenceMode::Dynamic);
    REQUIRE(p.scores.size() == scores.cols());
    for (std::size_t c = 0; c < scores.cols(); ++c)
        CHECK(p.scores[c] == scores.at(0, c));
    CHECK(p.label == argmax_lowest(scores.row(0), scores.cols()));
}

TEST_CASE("identical heads leave the consensus argmax unchanged") {
    Rng rng(405);
    for (int rep = 0; rep < 100; ++rep) {
        const auto z = random_vec(rng, 4);
        const auto out = dynamic_ensemble(z, z, z, CalibrationState{});
        CHECK(argmax_lowest(out.data(), 4) == argmax_lowest(z.data(), 4));
    }
}

TEST_CASE("nll_at_temperature matches direct evaluation") {
    Rng rng(406);
    Mat z(4, 3);
    rng.fill_normal(z.data(), z.size(), 0.0, 2.0);
    const std::vector<int> labels{0, 2, 1, 1};
    const double T = 1.7;
    double want = 0.0;
    for (std::size_t r = 0; r < 4; ++r) {
        std::vector<double> s(3);
        for (std::size_t c = 0; c < 3; ++c) s[c] = z.at(r, c) / T;
        want += -std::log(naive_softmax(s)[labels[r]]);
    }
    want /= 4.0;
    CHECK(nll_at_temperature(z, labels, T) ==
          doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("temperature fit recovers a known rescaling") {
    // Build well-calibrated logits: each row is the elementwise log of a
    // probability vector and its label is drawn from that same vector, so
    // T = 1 is (near) optimal. Multiplying the logits by 10 moves the
    // optimum to T near 10.
    Rng rng(407);
    const std::size_t C = 4, N = 2000;
    Mat logits(N, C);
    std::vector<int> labels(N);
    for (std::size_t r = 0; r < N; ++r) {
        std::vector<double> raw = random_vec(rng, C, 1.0);
        const auto p = naive_softmax(raw);
        for (std::size_t c = 0; c < C; ++c) logits.at(r, c) = std::log(p[c]);
        double u = rng.uniform(), acc = 0.0;
        int lab = static_cast<int>(C) - 1;
        for (std::size_t c = 0; c < C; ++c) {
            acc += p[c];
            if (u < acc) {
                lab = static_cast<int>(c);
                break;
            }
        }
        labels[r] = lab;
    }

    SUBCASE("well-calibrated logits keep T near 1") {
        const double t = fit_temperature(logits, labels);
        CHECK(t == doctest::Approx(1.0).epsilon(0.10));
        CHECK(nll_at_temperature(logits, labels, t) <=
              nll_at_temperature(logits, labels, 1.0) + 1e-12);
    }

    SUBCASE("x10 logits fit a temperature near 10") {
        Mat scaled = logits;
        for (std::size_t i = 0; i < scaled.size(); ++i)
            scaled.data()[i] *= 10.0;
        const double t = fit_temperature(scaled, labels);
        CHECK(t == doctest::Approx(10.0).epsilon(0.10));
    }

    SUBCASE("fit never does worse than the identity temperature") {
        // Random miscalibrated logits with random labels.
        Mat z(64, C);
        rng.fill_normal(z.data(), z.size(), 0.0, 5.0);
        std::vector<int> rl(64);
        for (auto& l : rl) l = static_cast<int>(rng.uniform_index(C));
        const double t = fit_temperature(z, rl);
        CHECK(nll_at_temperature(z, rl, t) <=
              nll_at_temperature(z, rl, 1.0) + 1e-12);
    }
}

TEST_CASE("calibrate fits per-head temperatures from buffer logit shapes") {
    // Construct a model and a buffer, then check the fitted temperatures
    // (a) reproduce on a rerun, (b) never do worse than T = 1 in NLL.
    ModelBundle b = tiny_bundle(3, 21);
    Rng rng(408);
    std::vector<BufferEntry> entries;
    for (int i = 0; i < 60; ++i) {
        BufferEntry e;
        e.audio = random_vec(rng, 3, 1.0);
        e.visual = random_vec(rng, 2, 1.0);
        e.label = static_cast<int>(rng.uniform_index(3));
        entries.push_back(std::move(e));
    }

    const CalibrationState cal = calibrate(b, entries);
    CHECK(cal.t_a == b.t_a);
    CHECK(cal.t_v == b.t_v);
    CHECK(cal.t_av == b.t_av);
    CHECK(cal.t_a > 0.0);
    CHECK(cal.t_v > 0.0);
    CHECK(cal.t_av > 0.0);

    // Recompute the logits the fit saw and verify the minimizer property.
    Mat audio(60, 3), visual(60, 2);
    std::vector<int> labels(60);
    for (int i = 0; i < 60; ++i) {
        std::copy(entries[i].audio.begin(), entries[i].audio.end(),
                  audio.row(i));
        std::copy(entries[i].visual.begin(), entries[i].visual.end(),
                  visual.row(i));
        labels[i] = entries[i].label;
    }
    const BatchOutput o = forward(b, audio, visual);
    CHECK(nll_at_temperature(o.z_a, labels, cal.t_a) <=
          nll_at_temperature(o.z_a, labels, 1.0) + 1e-8);
    CHECK(nll_at_temperature(o.z_v, labels, cal.t_v) <=
          nll_at_temperature(o.z_v, labels, 1.0) + 1e-8);
    CHECK(nll_at_temperature(o.z_av, labels, cal.t_av) <=
          nll_at_temperature(o.z_av, labels, 1.0) + 1e-8);

    ModelBundle b2 = tiny_bundle(3, 21);
    const CalibrationState cal2 = calibrate(b2, entries);
    CHECK(cal2.t_a == cal.t_a);
    CHECK(cal2.t_v == cal.t_v);
    CHECK(cal2.t_av == cal.t_av);
}

TEST_CASE("calibrating against an empty buffer is a warned no-op") {
    ModelBundle b = tiny_bundle();
    b.t_a = 1.25;
    const CalibrationState cal = calibrate(b, {});
    CHECK(b.t_a == 1.25);
    CHECK(cal.t_a == 1.25);
    CHECK(cal.t_v == 1.0);
}

TEST_CASE("mode names round trip") {
    for (InferenceMode m : {InferenceMode::Audio, InferenceMode::Visual,
                            InferenceMode::Multi, InferenceMode::Dynamic})
        CHECK(inference_mode_from(inference_mode_name(m)) == m);
    CHECK_THROWS_AS(inference_mode_from("telepathy"), std::invalid_argument);
}

TEST_SUITE_END();
