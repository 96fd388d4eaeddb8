#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mmcl/experiment.hpp"

using namespace mmcl;
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string config_error_of(const std::string& text) {
    try {
        parse_experiment_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

bool mentions(const std::string& msg, const std::string& needle) {
    return msg.find(needle) != std::string::npos;
}

std::string small_er_config() {
    return R"({
      "name": "exp_er",
      "dataset": {"num_classes": 4, "samples_per_class_train": 12,
                  "samples_per_class_test": 6, "dim_audio": 4, "dim_visual": 4,
                  "prototype_scale": 2.0, "noise_std_a": 0.3,
                  "noise_std_v": 0.3, "seed": 7},
      "scenario": {"kind": "seq", "num_tasks": 2, "classes_per_task": 2,
                   "seed": 3},
      "train": {"method": "er", "modality": "audio", "hidden_dim": 8,
                "feature_dim": 4, "learning_rate": 0.05, "batch_size": 8,
                "epochs_per_task": 2, "buffer_capacity": 32},
      "seeds": [1, 2]
    })";
}

fs::path fresh_dir(const std::string& leaf) {
    const fs::path dir = fs::temp_directory_path() / "mmcl_exp_tests" / leaf;
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    REQUIRE(is);
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("minimal config resolves defaults") {
    const auto cfg = parse_experiment_config(R"({"seeds": [5]})");
    CHECK(cfg.name == "experiment");
    CHECK(cfg.dataset.synthetic);
    CHECK(cfg.train.method == Method::Samm);
    CHECK(cfg.train.modality == ModalityMode::Multi);
    REQUIRE(cfg.inference_modes.size() == 1);
    CHECK(cfg.inference_modes[0] == InferenceMode::Dynamic);
    CHECK(cfg.output_dir == fs::path("out"));
    REQUIRE(cfg.seeds.size() == 1);
    CHECK(cfg.seeds[0] == 5);
}

TEST_CASE("field level errors") {
    CHECK(mentions(config_error_of(R"({"seeds": [1], "bogus": 1})"),
                   "unknown key 'bogus'"));
    CHECK(mentions(
        config_error_of(R"({"seeds": [1], "train": {"momentum": 0.9}})"),
        "train: unknown key 'momentum'"));
    CHECK(mentions(
        config_error_of(R"({"seeds": [1], "train": {"batch_size": "big"}})"),
        "train.batch_size"));
    CHECK(mentions(
        config_error_of(R"({"seeds": [1], "train": {"learning_rate": 0}})"),
        "learning_rate"));
    CHECK(mentions(config_error_of(R"({"seeds": []})"), "seeds"));
    CHECK(mentions(config_error_of(R"({})"), "seeds"));
    CHECK(mentions(
        config_error_of(R"({"seeds": [1], "scenario": {"kind": "iid"}})"),
        "scenario.kind"));
    CHECK(mentions(config_error_of(R"({"seeds": [1], "schema_version": 2})"),
                   "schema_version"));
    CHECK(mentions(
        config_error_of(R"({"seeds": [1], "dataset": {"type": "manifest"}})"),
        "train_manifest"));
    CHECK(mentions(config_error_of("not json at all"), "invalid JSON"));
}

TEST_CASE("single head methods cannot request other modes") {
    const std::string er = R"({
      "seeds": [1],
      "train": {"method": "er", "modality": "audio"},
      "inference_modes": ["dynamic"]
    })";
    const std::string msg = config_error_of(er);
    CHECK(mentions(msg, "inference_modes"));
    CHECK(mentions(msg, "dynamic"));

    // the head it trains is fine, and is also the default
    const auto explicit_cfg = parse_experiment_config(R"({
      "seeds": [1],
      "train": {"method": "er", "modality": "audio"},
      "inference_modes": ["audio"]
    })");
    CHECK(explicit_cfg.inference_modes ==
          std::vector<InferenceMode>{InferenceMode::Audio});
    const auto default_cfg = parse_experiment_config(
        R"({"seeds": [1], "train": {"method": "er", "modality": "audio"}})");
    CHECK(default_cfg.inference_modes ==
          std::vector<InferenceMode>{InferenceMode::Audio});
}

TEST_CASE("samm may request every head and duplicates collapse") {
    const auto cfg = parse_experiment_config(R"({
      "seeds": [1],
      "inference_modes": ["dynamic", "audio", "dynamic", "visual", "multi"]
    })");
    REQUIRE(cfg.inference_modes.size() == 4);
    CHECK(cfg.inference_modes[0] == InferenceMode::Dynamic);
    CHECK(cfg.inference_modes[1] == InferenceMode::Audio);
    CHECK(cfg.inference_modes[2] == InferenceMode::Visual);
    CHECK(cfg.inference_modes[3] == InferenceMode::Multi);
}

TEST_CASE("resolved config echo is a fixed point") {
    auto cfg = parse_experiment_config(small_er_config());
    const std::string echoed = resolved_config_json(cfg);
    const auto reparsed = parse_experiment_config(echoed);
    CHECK(resolved_config_json(reparsed) == echoed);
    // every knob appears explicitly
    for (const char* key :
         {"learning_rate", "buffer_capacity", "calibrate", "lambda", "beta",
          "gcil_power_exponent", "noise_std_a", "inference_modes"})
        CHECK(mentions(echoed, key));
}

TEST_CASE("load_experiment_config reports unreadable paths") {
    CHECK_THROWS_AS(load_experiment_config("/nonexistent/cfg.json"),
                    ConfigError);
}

TEST_CASE("run_experiment writes the full artifact set") {
    auto cfg = parse_experiment_config(small_er_config());
    cfg.output_dir = fresh_dir("artifacts");
    const RunArtifacts art = run_experiment(cfg);

    CHECK(fs::exists(art.results_json));
    CHECK(fs::exists(art.resolved_config));
    REQUIRE(art.matrix_csvs.size() == 2);
    REQUIRE(art.run_logs.size() == 2);
    CHECK(art.matrix_csvs[0].filename() == "matrix_1.csv");
    CHECK(art.matrix_csvs[1].filename() == "matrix_2.csv");
    for (const auto& p : art.matrix_csvs) {
        std::istringstream csv(slurp(p));
        std::string line;
        int lines = 0;
        while (std::getline(csv, line)) ++lines;
        CHECK(lines == 3);  // header + one row per task
    }
    for (const auto& p : art.run_logs) {
        const std::string log = slurp(p);
        CHECK(mentions(log, "seed"));
        CHECK(mentions(log, "train_wall_ms"));
    }

    const auto j = ordered_json::parse(slurp(art.results_json));
    CHECK(j.at("schema_version") == kResultsSchemaVersion);
    CHECK(j.at("name") == "exp_er");
    CHECK(j.at("method") == "er");
    CHECK(j.at("modality") == "audio");
    CHECK(j.at("scenario") == "seq");
    CHECK(j.at("num_tasks") == 2);

    // ER trained on audio reports the audio head only
    REQUIRE(j.at("modes").size() == 1);
    const auto& block = j.at("modes").at("audio");
    CHECK(block.at("final_mean_accuracy").at("per_seed").size() == 2);
    CHECK(block.at("final_mean_accuracy").at("mean").is_number());
    CHECK(block.at("final_mean_accuracy").at("std").is_number());
    CHECK(block.at("mean_accuracy_per_step").at("mean").size() == 2);
    CHECK(block.contains("stability"));
    CHECK(block.contains("plasticity"));
    CHECK(block.contains("tradeoff"));
    CHECK(block.contains("recency_bias"));
    CHECK(block.contains("recency_gap"));
    CHECK(block.contains("ece"));
    const double acc = block.at("final_mean_accuracy").at("mean");
    CHECK(acc >= 0.0);
    CHECK(acc <= 100.0);
}

TEST_CASE("reruns produce byte identical results") {
    auto cfg = parse_experiment_config(small_er_config());
    cfg.output_dir = fresh_dir("repro_a");
    const RunArtifacts a = run_experiment(cfg);
    const std::string results = slurp(a.results_json);
    const std::string resolved = slurp(a.resolved_config);
    std::vector<std::string> matrices;
    for (const auto& p : a.matrix_csvs) matrices.push_back(slurp(p));

    // identical config, same directory: every artifact byte for byte
    const RunArtifacts b = run_experiment(cfg);
    CHECK(slurp(b.results_json) == results);
    CHECK(slurp(b.resolved_config) == resolved);
    REQUIRE(b.matrix_csvs.size() == matrices.size());
    for (std::size_t i = 0; i < matrices.size(); ++i)
        CHECK(slurp(b.matrix_csvs[i]) == matrices[i]);

    // the output directory itself does not leak into the results
    cfg.output_dir = fresh_dir("repro_b");
    const RunArtifacts c = run_experiment(cfg);
    CHECK(slurp(c.results_json) == results);
}

TEST_CASE("joint results omit forgetting metrics") {
    auto cfg = parse_experiment_config(R"({
      "name": "exp_joint",
      "dataset": {"num_classes": 4, "samples_per_class_train": 8,
                  "samples_per_class_test": 4, "dim_audio": 4,
                  "dim_visual": 4, "seed": 7},
      "scenario": {"kind": "seq", "num_tasks": 2, "classes_per_task": 2,
                   "seed": 3},
      "train": {"method": "joint", "modality": "multi", "hidden_dim": 8,
                "feature_dim": 4, "learning_rate": 0.05, "batch_size": 8,
                "epochs_per_task": 1},
      "seeds": [1]
    })");
    cfg.output_dir = fresh_dir("joint");
    const RunArtifacts art = run_experiment(cfg);
    const auto j = ordered_json::parse(slurp(art.results_json));
    const auto& block = j.at("modes").at("multi");
    CHECK(!block.contains("stability"));
    CHECK(!block.contains("mean_accuracy_per_step"));
    CHECK(block.contains("final_mean_accuracy"));
    CHECK(block.contains("ece"));
}

TEST_CASE("compare renders one row per file and mode") {
    auto cfg = parse_experiment_config(small_er_config());
    cfg.output_dir = fresh_dir("cmp_a");
    const auto a = run_experiment(cfg);

    auto cfg2 = parse_experiment_config(small_er_config());
    cfg2.name = "exp_er_small_buf";
    cfg2.train.buffer_capacity = 8;
    cfg2.output_dir = fresh_dir("cmp_b");
    const auto b = run_experiment(cfg2);

    std::string csv;
    const std::string text =
        compare_results({a.results_json, b.results_json}, &csv);
    CHECK(mentions(text, "exp_er/er-audio/audio"));
    CHECK(mentions(text, "exp_er_small_buf/er-audio/audio"));
    CHECK(mentions(text, "+0.00"));  // first row is its own baseline

    std::istringstream rows(csv);
    std::string line;
    int lines = 0;
    while (std::getline(rows, line)) ++lines;
    CHECK(lines == 3);  // header + two rows
    CHECK(mentions(csv, "delta_final"));
}

TEST_CASE("compare rejects foreign schema versions") {
    const fs::path dir = fresh_dir("cmp_bad");
    fs::create_directories(dir);
    const fs::path bad = dir / "bad.json";
    std::ofstream(bad) << R"({"schema_version": 99, "modes": {}})";
    CHECK_THROWS_AS(compare_results({bad}), ConfigError);
    CHECK_THROWS_AS(compare_results({dir / "missing.json"}),
                    std::runtime_error);
    CHECK_THROWS_AS(compare_results({}), ConfigError);
}

TEST_CASE("plot draws one polyline per per-step curve") {
    auto cfg = parse_experiment_config(small_er_config());
    cfg.output_dir = fresh_dir("plot");
    const auto art = run_experiment(cfg);
    const std::string svg = plot_results_svg({art.results_json});
    CHECK(mentions(svg, "<svg"));
    CHECK(mentions(svg, "</svg>"));
    std::size_t polylines = 0, pos = 0;
    while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
        ++polylines;
        pos += 1;
    }
    CHECK(polylines == 1);
    CHECK(mentions(svg, "exp_er/audio"));
}

}  // TEST_SUITE
