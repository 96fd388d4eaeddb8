#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mmcl/datagen.hpp"

using namespace mmcl;
namespace fs = std::filesystem;

namespace {

bool same_vectors(const std::vector<double>& a, const std::vector<double>& b) {
    return a == b;
}

double l2(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

fs::path temp_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_SUITE_BEGIN("datagen");

TEST_CASE("zero noise is deterministic and classes are separated") {
    SyntheticDatasetSpec spec;
    spec.num_classes = 2;
    spec.samples_per_class_train = 1;
    spec.samples_per_class_test = 1;
    spec.noise_std_a = spec.noise_std_v = 0.0;
    spec.seed = 7;

    const Dataset d1 = generate_synthetic(spec);
    const Dataset d2 = generate_synthetic(spec);
    REQUIRE(d1.train.size() == 2);
    CHECK(!same_vectors(d1.train[0].audio, d1.train[1].audio));
    CHECK(!same_vectors(d1.train[0].visual, d1.train[1].visual));
    for (std::size_t i = 0; i < d1.train.size(); ++i) {
        CHECK(same_vectors(d1.train[i].audio, d2.train[i].audio));
        CHECK(same_vectors(d1.train[i].visual, d2.train[i].visual));
    }
}

TEST_CASE("different seeds give different data") {
    SyntheticDatasetSpec spec;
    spec.num_classes = 3;
    spec.seed = 1;
    const Dataset d1 = generate_synthetic(spec);
    spec.seed = 2;
    const Dataset d2 = generate_synthetic(spec);
    bool any_diff = false;
    for (std::size_t i = 0; i < d1.train.size() && !any_diff; ++i)
        any_diff = !same_vectors(d1.train[i].audio, d2.train[i].audio);
    CHECK(any_diff);
}

TEST_CASE("exact per-class counts and valid fields") {
    SyntheticDatasetSpec spec;
    spec.num_classes = 10;
    spec.samples_per_class_train = 50;
    spec.samples_per_class_test = 5;
    spec.num_superlabels = 5;
    spec.seed = 3;
    const Dataset ds = generate_synthetic(spec);
    REQUIRE(ds.train.size() == 500);
    REQUIRE(ds.test.size() == 50);

    std::vector<int> counts(10, 0);
    for (const auto& ex : ds.train) {
        ++counts[ex.label];
        CHECK(ex.superlabel == ex.label / 2);  // contiguous blocks of 2
        CHECK(ex.audio.size() == 8);
        CHECK(ex.visual.size() == 8);
        for (double v : ex.audio) CHECK(std::isfinite(v));
        for (double v : ex.visual) CHECK(std::isfinite(v));
    }
    for (int c = 0; c < 10; ++c) CHECK(counts[c] == 50);
}

TEST_CASE("nearest prototype classifies perfectly at zero noise") {
    SyntheticDatasetSpec spec;
    spec.num_classes = 4;
    spec.samples_per_class_train = 3;
    spec.noise_std_a = spec.noise_std_v = 0.0;
    spec.seed = 11;
    const Dataset ds = generate_synthetic(spec);

    std::vector<std::vector<double>> proto_a(4), proto_v(4);
    for (const auto& ex : ds.train) {
        if (proto_a[ex.label].empty()) {
            proto_a[ex.label] = ex.audio;
            proto_v[ex.label] = ex.visual;
        }
    }
    for (const auto& ex : ds.train) {
        int best_a = 0, best_v = 0;
        for (int c = 1; c < 4; ++c) {
            if (l2(ex.audio, proto_a[c]) < l2(ex.audio, proto_a[best_a]))
                best_a = c;
            if (l2(ex.visual, proto_v[c]) < l2(ex.visual, proto_v[best_v]))
                best_v = c;
        }
        CHECK(best_a == ex.label);
        CHECK(best_v == ex.label);
    }
}

TEST_CASE("audio shift scales audio displacement and leaves visual intact") {
    SyntheticDatasetSpec spec;
    spec.num_classes = 3;
    spec.samples_per_class_train = 6;
    spec.num_shift_tasks = 3;
    spec.noise_std_a = spec.noise_std_v = 0.0;
    spec.shift_std_a = 0.5;
    spec.shift_std_v = 0.3;
    spec.seed = 21;
    const Dataset lo = generate_synthetic(spec);
    spec.shift_std_a = 1.0;
    const Dataset hi = generate_synthetic(spec);

    auto mean_audio_displacement = [](const Dataset& ds) {
        // With zero noise, same-class samples differ only by task shift.
        std::vector<std::vector<double>> base(3);
        for (const auto& ex : ds.train)
            if (ex.task_id == 0 && base[ex.label].empty())
                base[ex.label] = ex.audio;
        double acc = 0.0;
        int n = 0;
        for (const auto& ex : ds.train)
            if (ex.task_id != 0) {
                acc += l2(ex.audio, base[ex.label]);
                ++n;
            }
        return acc / n;
    };
    CHECK(mean_audio_displacement(hi) > mean_audio_displacement(lo));
    for (std::size_t i = 0; i < lo.train.size(); ++i)
        CHECK(same_vectors(lo.train[i].visual, hi.train[i].visual));
}

TEST_CASE("rejects invalid parameters") {
    SyntheticDatasetSpec spec;
    spec.noise_std_a = -0.1;
    CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
    spec.noise_std_a = 0.1;
    spec.cross_modal_informativeness = 1.5;
    CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
    spec.cross_modal_informativeness = 0.5;
    spec.num_classes = 0;
    CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
}

TEST_CASE("manifest round trip preserves the dataset") {
    SyntheticDatasetSpec spec;
    spec.num_classes = 3;
    spec.samples_per_class_train = 2;
    spec.num_superlabels = 3;
    spec.seed = 5;
    const Dataset ds = generate_synthetic(spec);

    const fs::path dir = temp_dir("mmcl_manifest_rt");
    save_manifest(ds.info, ds.train, dir / "train.manifest");
    const ManifestData loaded = load_manifest(dir / "train.manifest");

    REQUIRE(loaded.examples.size() == ds.train.size());
    CHECK(loaded.info.num_classes == 3);
    CHECK(loaded.info.dim_audio == 8);
    for (std::size_t i = 0; i < ds.train.size(); ++i) {
        CHECK(loaded.examples[i].label == ds.train[i].label);
        CHECK(loaded.examples[i].superlabel == ds.train[i].superlabel);
        for (std::size_t d = 0; d < 8; ++d) {
            // Feature files hold float32, so compare after the same cast.
            CHECK(loaded.examples[i].audio[d] ==
                  static_cast<double>(static_cast<float>(ds.train[i].audio[d])));
            CHECK(loaded.examples[i].visual[d] ==
                  static_cast<double>(
                      static_cast<float>(ds.train[i].visual[d])));
        }
    }
}

TEST_CASE("empty manifest file loads as an empty dataset") {
    const fs::path dir = temp_dir("mmcl_manifest_empty");
    std::ofstream(dir / "empty.manifest").close();
    const ManifestData loaded = load_manifest(dir / "empty.manifest");
    CHECK(loaded.examples.empty());
}

TEST_CASE("manifest errors identify the offending record") {
    const fs::path dir = temp_dir("mmcl_manifest_err");

    SyntheticDatasetSpec spec;
    spec.num_classes = 2;
    spec.seed = 9;
    const Dataset ds = generate_synthetic(spec);
    save_manifest(ds.info, ds.train, dir / "ok.manifest");

    SUBCASE("label out of range") {
        std::ofstream os(dir / "bad.manifest");
        os << R"({"num_classes":2,"num_superlabels":1,"dim_audio":8,"dim_visual":8})"
           << "\n";
        os << R"({"audio_path":"features/x_a_0.bin","visual_path":"features/x_v_0.bin","label":2,"superlabel":0})"
           << "\n";
        os.close();
        try {
            load_manifest(dir / "bad.manifest");
            FAIL("expected ManifestError");
        } catch (const ManifestError& e) {
            CHECK(e.kind() == ManifestErrorKind::LabelOutOfRange);
            CHECK(std::string(e.what()).find("record 1") != std::string::npos);
        }
    }

    SUBCASE("missing feature file") {
        std::ofstream os(dir / "missing.manifest");
        os << R"({"num_classes":2,"num_superlabels":1,"dim_audio":8,"dim_visual":8})"
           << "\n";
        os << R"({"audio_path":"features/nope.bin","visual_path":"features/x_v_0.bin","label":0,"superlabel":0})"
           << "\n";
        os.close();
        try {
            load_manifest(dir / "missing.manifest");
            FAIL("expected ManifestError");
        } catch (const ManifestError& e) {
            CHECK(e.kind() == ManifestErrorKind::MissingFeatureFile);
            CHECK(std::string(e.what()).find("nope.bin") != std::string::npos);
        }
    }

    SUBCASE("dimension mismatch") {
        std::ofstream os(dir / "dim.manifest");
        os << R"({"num_classes":2,"num_superlabels":1,"dim_audio":4,"dim_visual":8})"
           << "\n";
        os << R"({"audio_path":"features/x_a_0.bin","visual_path":"features/x_v_0.bin","label":0,"superlabel":0})"
           << "\n";
        os.close();
        try {
            load_manifest(dir / "dim.manifest");
            FAIL("expected ManifestError");
        } catch (const ManifestError& e) {
            CHECK(e.kind() == ManifestErrorKind::DimensionMismatch);
        }
    }

    SUBCASE("malformed record") {
        std::ofstream os(dir / "mal.manifest");
        os << R"({"num_classes":2,"num_superlabels":1,"dim_audio":8,"dim_visual":8})"
           << "\n";
        os << "{not json}\n";
        os.close();
        try {
            load_manifest(dir / "mal.manifest");
            FAIL("expected ManifestError");
        } catch (const ManifestError& e) {
            CHECK(e.kind() == ManifestErrorKind::BadRecord);
        }
    }
}

TEST_CASE("three-row manifest loads in order") {
    const fs::path dir = temp_dir("mmcl_manifest_three");
    SyntheticDatasetSpec spec;
    spec.num_classes = 3;
    spec.seed = 13;
    Dataset ds = generate_synthetic(spec);
    REQUIRE(ds.train.size() == 3);
    save_manifest(ds.info, ds.train, dir / "m.manifest");
    const ManifestData loaded = load_manifest(dir / "m.manifest");
    REQUIRE(loaded.examples.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(loaded.examples[i].label == i);
}

TEST_CASE("train/test manifest pair loads into one dataset") {
    const fs::path dir = temp_dir("mmcl_manifest_pair");
    SyntheticDatasetSpec spec;
    spec.num_classes = 2;
    spec.samples_per_class_train = 2;
    spec.samples_per_class_test = 1;
    spec.seed = 17;
    const Dataset ds = generate_synthetic(spec);
    save_manifest(ds.info, ds.train, dir / "train.manifest", "features",
                  "train");
    save_manifest(ds.info, ds.test, dir / "test.manifest", "features", "test");
    const Dataset loaded = load_dataset_from_manifests(dir / "train.manifest",
                                                       dir / "test.manifest");
    CHECK(loaded.train.size() == 4);
    CHECK(loaded.test.size() == 2);
    CHECK(loaded.info.num_classes == 2);
}

TEST_SUITE_END();
