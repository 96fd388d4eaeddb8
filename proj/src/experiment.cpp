#include "mmcl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "mmcl/inference.hpp"
#include "mmcl/losses.hpp"
#include "mmcl/metrics.hpp"

namespace mmcl {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& msg) {
    throw ConfigError("config: " + msg);
}

void check_keys(const ordered_json& obj, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const bool known =
            std::any_of(allowed.begin(), allowed.end(),
                        [&](const char* k) { return it.key() == k; });
        if (!known) fail(ctx + ": unknown key '" + it.key() + "'");
    }
}

const ordered_json* find(const ordered_json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

int get_int(const ordered_json& obj, const std::string& ctx, const char* key,
            int def) {
    const auto* v = find(obj, key);
    if (!v) return def;
    if (!v->is_number_integer()) fail(ctx + "." + key + ": expected integer");
    return v->get<int>();
}

std::uint64_t get_u64(const ordered_json& obj, const std::string& ctx,
                      const char* key, std::uint64_t def) {
    const auto* v = find(obj, key);
    if (!v) return def;
    if (!v->is_number_integer() || (v->is_number_integer() && v->get<std::int64_t>() < 0 && !v->is_number_unsigned()))
        fail(ctx + "." + key + ": expected non-negative integer");
    return v->get<std::uint64_t>();
}

double get_num(const ordered_json& obj, const std::string& ctx,
               const char* key, double def) {
    const auto* v = find(obj, key);
    if (!v) return def;
    if (!v->is_number()) fail(ctx + "." + key + ": expected number");
    return v->get<double>();
}

bool get_bool(const ordered_json& obj, const std::string& ctx, const char* key,
              bool def) {
    const auto* v = find(obj, key);
    if (!v) return def;
    if (!v->is_boolean()) fail(ctx + "." + key + ": expected boolean");
    return v->get<bool>();
}

std::string get_str(const ordered_json& obj, const std::string& ctx,
                    const char* key, const std::string& def) {
    const auto* v = find(obj, key);
    if (!v) return def;
    if (!v->is_string()) fail(ctx + "." + key + ": expected string");
    return v->get<std::string>();
}

DatasetConfig parse_dataset(const ordered_json& obj) {
    if (!obj.is_object()) fail("dataset: expected an object");
    DatasetConfig out;
    const std::string type = get_str(obj, "dataset", "type", "synthetic");
    if (type == "synthetic") {
        check_keys(obj, "dataset",
                   {"type", "num_classes", "samples_per_class_train",
                    "samples_per_class_test", "dim_audio", "dim_visual",
                    "prototype_scale", "noise_std_a", "noise_std_v",
                    "shift_std_a", "shift_std_v",
                    "cross_modal_informativeness", "num_shift_tasks",
                    "num_superlabels", "seed"});
        out.synthetic = true;
        SyntheticDatasetSpec& s = out.spec;
        const std::string ctx = "dataset";
        s.num_classes = get_int(obj, ctx, "num_classes", s.num_classes);
        s.samples_per_class_train = get_int(obj, ctx, "samples_per_class_train",
                                            s.samples_per_class_train);
        s.samples_per_class_test = get_int(obj, ctx, "samples_per_class_test",
                                           s.samples_per_class_test);
        s.dim_audio = get_int(obj, ctx, "dim_audio", s.dim_audio);
        s.dim_visual = get_int(obj, ctx, "dim_visual", s.dim_visual);
        s.prototype_scale =
            get_num(obj, ctx, "prototype_scale", s.prototype_scale);
        s.noise_std_a = get_num(obj, ctx, "noise_std_a", s.noise_std_a);
        s.noise_std_v = get_num(obj, ctx, "noise_std_v", s.noise_std_v);
        s.shift_std_a = get_num(obj, ctx, "shift_std_a", s.shift_std_a);
        s.shift_std_v = get_num(obj, ctx, "shift_std_v", s.shift_std_v);
        s.cross_modal_informativeness =
            get_num(obj, ctx, "cross_modal_informativeness",
                    s.cross_modal_informativeness);
        s.num_shift_tasks =
            get_int(obj, ctx, "num_shift_tasks", s.num_shift_tasks);
        s.num_superlabels =
            get_int(obj, ctx, "num_superlabels", s.num_superlabels);
        s.seed = get_u64(obj, ctx, "seed", s.seed);
    } else if (type == "manifest") {
        check_keys(obj, "dataset", {"type", "train_manifest", "test_manifest"});
        out.synthetic = false;
        const std::string train =
            get_str(obj, "dataset", "train_manifest", "");
        const std::string test = get_str(obj, "dataset", "test_manifest", "");
        if (train.empty()) fail("dataset.train_manifest: required");
        if (test.empty()) fail("dataset.test_manifest: required");
        out.train_manifest = train;
        out.test_manifest = test;
    } else {
        fail("dataset.type: expected 'synthetic' or 'manifest', got '" + type +
             "'");
    }
    return out;
}

ScenarioSpec parse_scenario(const ordered_json& obj) {
    if (!obj.is_object()) fail("scenario: expected an object");
    check_keys(obj, "scenario",
               {"kind", "num_tasks", "classes_per_task",
                "subclasses_per_task_per_super", "gcil_samples_per_task",
                "gcil_max_classes_per_task", "gcil_distribution",
                "gcil_power_exponent", "seed"});
    ScenarioSpec s;
    const std::string ctx = "scenario";
    const std::string kind = get_str(obj, ctx, "kind", "seq");
    if (kind == "seq")
        s.kind = ScenarioKind::Seq;
    else if (kind == "dom")
        s.kind = ScenarioKind::Dom;
    else if (kind == "gcil")
        s.kind = ScenarioKind::Gcil;
    else
        fail("scenario.kind: expected 'seq', 'dom' or 'gcil', got '" + kind +
             "'");
    s.num_tasks = get_int(obj, ctx, "num_tasks", s.num_tasks);
    if (s.num_tasks < 1) fail("scenario.num_tasks: must be >= 1");
    s.classes_per_task =
        get_int(obj, ctx, "classes_per_task", s.classes_per_task);
    s.subclasses_per_task_per_super =
        get_int(obj, ctx, "subclasses_per_task_per_super",
                s.subclasses_per_task_per_super);
    s.gcil_samples_per_task =
        get_int(obj, ctx, "gcil_samples_per_task", s.gcil_samples_per_task);
    s.gcil_max_classes_per_task = get_int(obj, ctx, "gcil_max_classes_per_task",
                                          s.gcil_max_classes_per_task);
    const std::string dist = get_str(obj, ctx, "gcil_distribution", "uniform");
    if (dist == "uniform")
        s.gcil_distribution = GcilDistribution::Uniform;
    else if (dist == "longtail")
        s.gcil_distribution = GcilDistribution::Longtail;
    else
        fail("scenario.gcil_distribution: expected 'uniform' or 'longtail'");
    s.gcil_power_exponent =
        get_num(obj, ctx, "gcil_power_exponent", s.gcil_power_exponent);
    s.seed = get_u64(obj, ctx, "seed", s.seed);
    return s;
}

TrainConfig parse_train(const ordered_json& obj) {
    if (!obj.is_object()) fail("train: expected an object");
    check_keys(obj, "train",
               {"method", "modality", "hidden_dim", "feature_dim",
                "width_multiplier", "film_audio_conditions_visual",
                "learning_rate", "batch_size", "epochs_per_task",
                "buffer_capacity", "buffer_batch_size", "lambda", "beta",
                "calibrate"});
    TrainConfig t;
    const std::string ctx = "train";
    try {
        t.method = method_from(get_str(obj, ctx, "method", "samm"));
        t.modality = modality_from(get_str(obj, ctx, "modality", "multi"));
    } catch (const std::invalid_argument& e) {
        fail(std::string("train: ") + e.what());
    }
    t.hidden_dim = get_int(obj, ctx, "hidden_dim", t.hidden_dim);
    t.feature_dim = get_int(obj, ctx, "feature_dim", t.feature_dim);
    t.width_multiplier =
        get_num(obj, ctx, "width_multiplier", t.width_multiplier);
    t.film_audio_conditions_visual =
        get_bool(obj, ctx, "film_audio_conditions_visual",
                 t.film_audio_conditions_visual);
    t.lr = get_num(obj, ctx, "learning_rate", t.lr);
    if (t.lr <= 0.0) fail("train.learning_rate: must be > 0");
    t.batch_size = get_int(obj, ctx, "batch_size", t.batch_size);
    if (t.batch_size < 1) fail("train.batch_size: must be >= 1");
    t.epochs_per_task = get_int(obj, ctx, "epochs_per_task", t.epochs_per_task);
    if (t.epochs_per_task < 0) fail("train.epochs_per_task: must be >= 0");
    const int cap = get_int(obj, ctx, "buffer_capacity",
                            static_cast<int>(t.buffer_capacity));
    if (cap < 0) fail("train.buffer_capacity: must be >= 0");
    t.buffer_capacity = static_cast<std::size_t>(cap);
    t.buffer_batch_size =
        get_int(obj, ctx, "buffer_batch_size", t.buffer_batch_size);
    if (t.buffer_batch_size < 0) fail("train.buffer_batch_size: must be >= 0");
    t.weights.lambda = get_num(obj, ctx, "lambda", t.weights.lambda);
    t.weights.beta = get_num(obj, ctx, "beta", t.weights.beta);
    t.calibrate = get_bool(obj, ctx, "calibrate", t.calibrate);
    return t;
}

std::vector<InferenceMode> parse_modes(const ordered_json* arr,
                                       const TrainConfig& train) {
    std::vector<InferenceMode> modes;
    if (arr) {
        if (!arr->is_array()) fail("inference_modes: expected an array");
        for (const auto& v : *arr) {
            if (!v.is_string())
                fail("inference_modes: expected mode name strings");
            try {
                modes.push_back(inference_mode_from(v.get<std::string>()));
            } catch (const std::invalid_argument& e) {
                fail(std::string("inference_modes: ") + e.what());
            }
        }
        // dedupe, preserving first occurrence
        std::vector<InferenceMode> unique;
        for (InferenceMode m : modes)
            if (std::find(unique.begin(), unique.end(), m) == unique.end())
                unique.push_back(m);
        modes = std::move(unique);
    }
    if (modes.empty())
        modes.push_back(eval_mode_for(train.method, train.modality));

    // A method that trains a single head can only be scored on that head.
    if (train.method != Method::Samm) {
        const InferenceMode canonical =
            eval_mode_for(train.method, train.modality);
        for (InferenceMode m : modes)
            if (m != canonical)
                fail(std::string("inference_modes: mode '") +
                     inference_mode_name(m) + "' is unavailable for method '" +
                     method_name(train.method) + "' with modality '" +
                     modality_name(train.modality) + "' (trains only the '" +
                     inference_mode_name(canonical) + "' head)");
    }
    return modes;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

ordered_json scalar_stats(const std::vector<double>& per_seed) {
    ordered_json j;
    j["per_seed"] = per_seed;
    j["mean"] = mean_of(per_seed);
    j["std"] = std_of(per_seed);
    return j;
}

ordered_json vector_stats(const std::vector<std::vector<double>>& per_seed) {
    ordered_json j;
    j["per_seed"] = per_seed;
    const std::size_t n = per_seed.empty() ? 0 : per_seed[0].size();
    std::vector<double> mean(n, 0.0), sd(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> col;
        col.reserve(per_seed.size());
        for (const auto& row : per_seed) col.push_back(row.at(i));
        mean[i] = mean_of(col);
        sd[i] = std_of(col);
    }
    j["mean"] = mean;
    j["std"] = sd;
    return j;
}

// Per-seed, per-mode evaluation summary collected after training.
struct ModeSeedMetrics {
    double final_mean = 0.0;
    std::vector<double> final_row;
    std::optional<StabilityPlasticity> sp;
    std::vector<double> mean_per_step;
    std::vector<double> stab_per_step;
    std::optional<std::vector<double>> recency;
    std::optional<double> recency_gap;
    double ece = 0.0;
};

std::vector<std::size_t> union_test_indices(const ScenarioStream& stream,
                                            std::size_t test_size) {
    std::vector<char> seen(test_size, 0);
    std::vector<std::size_t> out;
    for (const auto& task : stream.tasks)
        for (std::size_t i : task.test_indices)
            if (!seen[i]) {
                seen[i] = 1;
                out.push_back(i);
            }
    std::sort(out.begin(), out.end());
    return out;
}

ModeSeedMetrics compute_mode_metrics(const TrainResult& res, std::size_t m,
                                     const ScenarioStream& stream,
                                     const BatchOutput& union_out,
                                     const std::vector<int>& union_targets,
                                     bool joint) {
    ModeSeedMetrics out;
    const TaskPerformanceMatrix& matrix = res.matrices[m];
    const int T = matrix.num_tasks();
    for (int j = 0; j < T; ++j) out.final_row.push_back(matrix.at(T - 1, j));
    out.final_mean = mean_of(out.final_row);

    if (!joint) {
        out.mean_per_step = mean_accuracy_per_step(matrix);
        if (T >= 2) {
            out.sp = stability_plasticity(matrix);
            out.stab_per_step = stability_per_step(matrix);
        }
    }

    const Mat scores =
        predict_scores(res.bundle, union_out, res.eval_modes[m]);
    Mat probs(scores.rows(), scores.cols());
    for (std::size_t r = 0; r < scores.rows(); ++r)
        softmax_row(scores.row(r), probs.row(r), scores.cols());

    const bool mapped =
        std::all_of(stream.target_to_task.begin(), stream.target_to_task.end(),
                    [](int t) { return t >= 0; });
    if (mapped && T >= 1) {
        const auto bias =
            recency_bias(probs, stream.target_to_task, T);
        out.recency_gap = bias.back() - bias.front();
        out.recency = bias;
    }
    out.ece = expected_calibration_error(probs, union_targets);
    return out;
}

std::string format_pm(double mean, double sd) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f±%.2f", mean, sd);
    return buf;
}

// Column widths count glyphs, not bytes (the ± sign is two bytes of UTF-8).
std::size_t display_width(const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++w;
    return w;
}

struct CompareRow {
    std::string label;
    std::string final_pm;
    std::string stability_pm;
    std::string plasticity_pm;
    std::string tradeoff_pm;
    std::string delta;
    double final_mean = 0.0;
    double final_std = 0.0;
    // raw values for the csv (nan when absent)
    double s_mean = std::nan(""), s_std = std::nan("");
    double p_mean = std::nan(""), p_std = std::nan("");
    double t_mean = std::nan(""), t_std = std::nan("");
    double delta_val = 0.0;
};

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        fail(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) fail("top level: expected an object");
    check_keys(j, "top level",
               {"schema_version", "name", "dataset", "scenario", "train",
                "inference_modes", "output_dir", "seeds"});
    const int version = get_int(j, "top level", "schema_version", 1);
    if (version != 1) fail("schema_version: expected 1");

    ExperimentConfig cfg;
    cfg.name = get_str(j, "top level", "name", cfg.name);
    if (const auto* d = find(j, "dataset")) cfg.dataset = parse_dataset(*d);
    if (const auto* s = find(j, "scenario")) cfg.scenario = parse_scenario(*s);
    if (const auto* t = find(j, "train")) cfg.train = parse_train(*t);
    cfg.inference_modes = parse_modes(find(j, "inference_modes"), cfg.train);
    cfg.output_dir = get_str(j, "top level", "output_dir", "out");

    if (const auto* seeds = find(j, "seeds")) {
        if (!seeds->is_array() || seeds->empty())
            fail("seeds: expected a non-empty array of integers");
        for (const auto& v : *seeds) {
            if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
                fail("seeds: expected non-negative integers");
            cfg.seeds.push_back(v.get<std::uint64_t>());
        }
    }
    if (cfg.seeds.empty()) fail("seeds: at least one seed is required");
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) fail("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_experiment_config(buf.str());
}

std::string resolved_config_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["schema_version"] = 1;
    j["name"] = cfg.name;

    ordered_json d;
    if (cfg.dataset.synthetic) {
        const SyntheticDatasetSpec& s = cfg.dataset.spec;
        d["type"] = "synthetic";
        d["num_classes"] = s.num_classes;
        d["samples_per_class_train"] = s.samples_per_class_train;
        d["samples_per_class_test"] = s.samples_per_class_test;
        d["dim_audio"] = s.dim_audio;
        d["dim_visual"] = s.dim_visual;
        d["prototype_scale"] = s.prototype_scale;
        d["noise_std_a"] = s.noise_std_a;
        d["noise_std_v"] = s.noise_std_v;
        d["shift_std_a"] = s.shift_std_a;
        d["shift_std_v"] = s.shift_std_v;
        d["cross_modal_informativeness"] = s.cross_modal_informativeness;
        d["num_shift_tasks"] = s.num_shift_tasks;
        d["num_superlabels"] = s.num_superlabels;
        d["seed"] = s.seed;
    } else {
        d["type"] = "manifest";
        d["train_manifest"] = cfg.dataset.train_manifest.string();
        d["test_manifest"] = cfg.dataset.test_manifest.string();
    }
    j["dataset"] = d;

    ordered_json s;
    const ScenarioSpec& sc = cfg.scenario;
    s["kind"] = sc.kind == ScenarioKind::Seq   ? "seq"
                : sc.kind == ScenarioKind::Dom ? "dom"
                                               : "gcil";
    s["num_tasks"] = sc.num_tasks;
    s["classes_per_task"] = sc.classes_per_task;
    s["subclasses_per_task_per_super"] = sc.subclasses_per_task_per_super;
    s["gcil_samples_per_task"] = sc.gcil_samples_per_task;
    s["gcil_max_classes_per_task"] = sc.gcil_max_classes_per_task;
    s["gcil_distribution"] =
        sc.gcil_distribution == GcilDistribution::Uniform ? "uniform"
                                                          : "longtail";
    s["gcil_power_exponent"] = sc.gcil_power_exponent;
    s["seed"] = sc.seed;
    j["scenario"] = s;

    ordered_json t;
    const TrainConfig& tc = cfg.train;
    t["method"] = method_name(tc.method);
    t["modality"] = modality_name(tc.modality);
    t["hidden_dim"] = tc.hidden_dim;
    t["feature_dim"] = tc.feature_dim;
    t["width_multiplier"] = tc.width_multiplier;
    t["film_audio_conditions_visual"] = tc.film_audio_conditions_visual;
    t["learning_rate"] = tc.lr;
    t["batch_size"] = tc.batch_size;
    t["epochs_per_task"] = tc.epochs_per_task;
    t["buffer_capacity"] = tc.buffer_capacity;
    t["buffer_batch_size"] = tc.buffer_batch_size;
    t["lambda"] = tc.weights.lambda;
    t["beta"] = tc.weights.beta;
    t["calibrate"] = tc.calibrate;
    j["train"] = t;

    ordered_json modes = ordered_json::array();
    for (InferenceMode m : cfg.inference_modes)
        modes.push_back(inference_mode_name(m));
    j["inference_modes"] = modes;
    j["output_dir"] = cfg.output_dir.string();
    j["seeds"] = cfg.seeds;
    return j.dump(2) + "\n";
}

Dataset build_dataset(const DatasetConfig& config) {
    if (config.synthetic) return generate_synthetic(config.spec);
    return load_dataset_from_manifests(config.train_manifest,
                                       config.test_manifest);
}

RunArtifacts run_experiment(const ExperimentConfig& config) {
    fs::create_directories(config.output_dir);
    const Dataset data = build_dataset(config.dataset);
    const ScenarioStream stream = build_stream(data, config.scenario);
    const bool joint = config.train.method == Method::Joint;

    const auto union_idx = union_test_indices(stream, data.test.size());
    Mat union_audio(union_idx.size(), data.info.dim_audio);
    Mat union_visual(union_idx.size(), data.info.dim_visual);
    std::vector<int> union_targets(union_idx.size());
    for (std::size_t r = 0; r < union_idx.size(); ++r) {
        const PairedExample& ex = data.test[union_idx[r]];
        std::copy(ex.audio.begin(), ex.audio.end(), union_audio.row(r));
        std::copy(ex.visual.begin(), ex.visual.end(), union_visual.row(r));
        union_targets[r] = stream.target_of(ex);
    }

    RunArtifacts artifacts;
    // metrics[mode][seed]
    std::vector<std::vector<ModeSeedMetrics>> metrics(
        config.inference_modes.size());

    for (const std::uint64_t seed : config.seeds) {
        TrainConfig tc = config.train;
        tc.eval_modes = config.inference_modes;
        tc.seed = seed;

        const fs::path log_path =
            config.output_dir / ("run_" + std::to_string(seed) + ".log");
        std::ofstream log(log_path);
        if (!log)
            throw std::runtime_error("cannot write " + log_path.string());
        log << "experiment " << config.name << " method "
            << method_name(tc.method) << " modality "
            << modality_name(tc.modality) << " seed " << seed << "\n";

        const TrainResult res = train_stream(data, stream, tc, &log);
        for (const auto& w : res.record.warnings) log << "warning: " << w
                                                      << "\n";
        log << "train_wall_ms " << res.record.train_wall_ms << "\n";
        artifacts.run_logs.push_back(log_path);

        const BatchOutput union_out =
            forward(res.bundle, union_audio, union_visual);
        for (std::size_t m = 0; m < config.inference_modes.size(); ++m) {
            metrics[m].push_back(compute_mode_metrics(
                res, m, stream, union_out, union_targets, joint));

            const std::string mode_suffix =
                m == 0 ? ""
                       : std::string("_") +
                             inference_mode_name(config.inference_modes[m]);
            const fs::path csv_path =
                config.output_dir /
                ("matrix_" + std::to_string(seed) + mode_suffix + ".csv");
            res.matrices[m].save_csv(csv_path);
            artifacts.matrix_csvs.push_back(csv_path);
        }
    }

    ordered_json out;
    out["schema_version"] = kResultsSchemaVersion;
    out["name"] = config.name;
    out["method"] = method_name(config.train.method);
    out["modality"] = modality_name(config.train.modality);
    out["scenario"] = config.scenario.kind == ScenarioKind::Seq   ? "seq"
                      : config.scenario.kind == ScenarioKind::Dom ? "dom"
                                                                  : "gcil";
    out["num_tasks"] = stream.tasks.size();
    out["num_targets"] = stream.num_targets;
    out["seeds"] = config.seeds;
    out["modes"] = ordered_json::object();

    for (std::size_t m = 0; m < config.inference_modes.size(); ++m) {
        const auto& per_seed = metrics[m];
        ordered_json block;

        std::vector<double> finals, eces;
        std::vector<std::vector<double>> rows;
        for (const auto& ms : per_seed) {
            finals.push_back(ms.final_mean);
            eces.push_back(ms.ece);
            rows.push_back(ms.final_row);
        }
        block["final_mean_accuracy"] = scalar_stats(finals);
        block["final_row_accuracy"] = vector_stats(rows);

        if (per_seed[0].sp) {
            std::vector<double> s, p, t;
            for (const auto& ms : per_seed) {
                s.push_back(ms.sp->stability);
                p.push_back(ms.sp->plasticity);
                t.push_back(ms.sp->tradeoff);
            }
            block["stability"] = scalar_stats(s);
            block["plasticity"] = scalar_stats(p);
            block["tradeoff"] = scalar_stats(t);
        }
        if (!per_seed[0].mean_per_step.empty()) {
            std::vector<std::vector<double>> curves;
            for (const auto& ms : per_seed) curves.push_back(ms.mean_per_step);
            block["mean_accuracy_per_step"] = vector_stats(curves);
        }
        if (!per_seed[0].stab_per_step.empty()) {
            std::vector<std::vector<double>> curves;
            for (const auto& ms : per_seed) curves.push_back(ms.stab_per_step);
            block["stability_per_step"] = vector_stats(curves);
        }
        if (per_seed[0].recency) {
            std::vector<std::vector<double>> biases;
            std::vector<double> gaps;
            for (const auto& ms : per_seed) {
                biases.push_back(*ms.recency);
                gaps.push_back(*ms.recency_gap);
            }
            block["recency_bias"] = vector_stats(biases);
            block["recency_gap"] = scalar_stats(gaps);
        }
        block["ece"] = scalar_stats(eces);

        out["modes"][inference_mode_name(config.inference_modes[m])] =
            std::move(block);
    }

    artifacts.results_json = config.output_dir / "results.json";
    {
        std::ofstream os(artifacts.results_json);
        if (!os)
            throw std::runtime_error("cannot write " +
                                     artifacts.results_json.string());
        os << out.dump(2) << "\n";
    }
    artifacts.resolved_config = config.output_dir / "config_resolved.json";
    {
        std::ofstream os(artifacts.resolved_config);
        if (!os)
            throw std::runtime_error("cannot write " +
                                     artifacts.resolved_config.string());
        os << resolved_config_json(config);
    }
    return artifacts;
}

std::string compare_results(const std::vector<std::filesystem::path>& files,
                            std::string* csv_out) {
    if (files.empty()) fail("compare: no results files given");

    std::vector<CompareRow> table;
    for (const auto& path : files) {
        std::ifstream is(path);
        if (!is)
            throw std::runtime_error("cannot open " + path.string());
        ordered_json j;
        try {
            j = ordered_json::parse(is);
        } catch (const std::exception& e) {
            throw std::runtime_error("cannot parse " + path.string() + ": " +
                                     e.what());
        }
        if (!j.contains("schema_version") ||
            j["schema_version"].get<int>() != kResultsSchemaVersion)
            fail("compare: " + path.string() +
                 ": unsupported results schema version");

        const std::string base = j.value("name", path.stem().string());
        const std::string method = j.value("method", "?");
        const std::string modality = j.value("modality", "?");
        for (auto it = j.at("modes").begin(); it != j.at("modes").end();
             ++it) {
            const ordered_json& b = it.value();
            CompareRow row;
            row.label = base + "/" + method + "-" + modality + "/" + it.key();
            row.final_mean = b.at("final_mean_accuracy").at("mean");
            row.final_std = b.at("final_mean_accuracy").at("std");
            row.final_pm = format_pm(row.final_mean, row.final_std);
            if (b.contains("stability")) {
                row.s_mean = b["stability"]["mean"];
                row.s_std = b["stability"]["std"];
                row.p_mean = b["plasticity"]["mean"];
                row.p_std = b["plasticity"]["std"];
                row.t_mean = b["tradeoff"]["mean"];
                row.t_std = b["tradeoff"]["std"];
                row.stability_pm = format_pm(row.s_mean, row.s_std);
                row.plasticity_pm = format_pm(row.p_mean, row.p_std);
                row.tradeoff_pm = format_pm(row.t_mean, row.t_std);
            } else {
                row.stability_pm = row.plasticity_pm = row.tradeoff_pm = "-";
            }
            table.push_back(std::move(row));
        }
    }

    for (auto& row : table) {
        row.delta_val = row.final_mean - table.front().final_mean;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%+.2f", row.delta_val);
        row.delta = buf;
    }

    const std::vector<std::string> headers{"run",      "final",    "stability",
                                           "plasticity", "tradeoff", "delta"};
    std::vector<std::size_t> widths;
    for (const auto& h : headers) widths.push_back(h.size());
    for (const auto& r : table) {
        widths[0] = std::max(widths[0], display_width(r.label));
        widths[1] = std::max(widths[1], display_width(r.final_pm));
        widths[2] = std::max(widths[2], display_width(r.stability_pm));
        widths[3] = std::max(widths[3], display_width(r.plasticity_pm));
        widths[4] = std::max(widths[4], display_width(r.tradeoff_pm));
        widths[5] = std::max(widths[5], display_width(r.delta));
    }
    auto pad = [](const std::string& s, std::size_t w) {
        return s + std::string(w - display_width(s), ' ');
    };
    std::ostringstream text;
    for (std::size_t c = 0; c < headers.size(); ++c)
        text << pad(headers[c], widths[c]) << (c + 1 < headers.size() ? "  "
                                                                      : "");
    text << "\n";
    for (std::size_t c = 0; c < headers.size(); ++c)
        text << std::string(widths[c], '-')
             << (c + 1 < headers.size() ? "  " : "");
    text << "\n";
    for (const auto& r : table) {
        const std::string cells[6] = {r.label,         r.final_pm,
                                      r.stability_pm,  r.plasticity_pm,
                                      r.tradeoff_pm,   r.delta};
        for (std::size_t c = 0; c < 6; ++c)
            text << pad(cells[c], widths[c]) << (c + 1 < 6 ? "  " : "");
        text << "\n";
    }

    if (csv_out) {
        std::ostringstream csv;
        csv << "run,final_mean,final_std,stability_mean,stability_std,"
               "plasticity_mean,plasticity_std,tradeoff_mean,tradeoff_std,"
               "delta_final\n";
        char buf[64];
        auto num = [&](double v) -> std::string {
            if (std::isnan(v)) return "";
            std::snprintf(buf, sizeof(buf), "%.4f", v);
            return buf;
        };
        for (const auto& r : table) {
            csv << r.label << "," << num(r.final_mean) << ","
                << num(r.final_std) << "," << num(r.s_mean) << ","
                << num(r.s_std) << "," << num(r.p_mean) << "," << num(r.p_std)
                << "," << num(r.t_mean) << "," << num(r.t_std) << ","
                << num(r.delta_val) << "\n";
        }
        *csv_out = csv.str();
    }
    return text.str();
}

std::string plot_results_svg(const std::vector<std::filesystem::path>& files) {
    if (files.empty()) fail("plot: no results files given");

    struct Curve {
        std::string label;
        std::vector<double> values;
    };
    std::vector<Curve> curves;
    for (const auto& path : files) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open " + path.string());
        ordered_json j;
        try {
            j = ordered_json::parse(is);
        } catch (const std::exception& e) {
            throw std::runtime_error("cannot parse " + path.string() + ": " +
                                     e.what());
        }
        if (!j.contains("schema_version") ||
            j["schema_version"].get<int>() != kResultsSchemaVersion)
            fail("plot: " + path.string() +
                 ": unsupported results schema version");
        const std::string base = j.value("name", path.stem().string());
        for (auto it = j.at("modes").begin(); it != j.at("modes").end();
             ++it) {
            if (!it.value().contains("mean_accuracy_per_step")) continue;
            Curve c;
            c.label = base + "/" + it.key();
            c.values = it.value()["mean_accuracy_per_step"]["mean"]
                           .get<std::vector<double>>();
            curves.push_back(std::move(c));
        }
    }

    const int W = 720, H = 440, L = 56, R = 16, T = 24, B = 48;
    const double plot_w = W - L - R, plot_h = H - T - B;
    std::size_t steps = 1;
    for (const auto& c : curves) steps = std::max(steps, c.values.size());

    auto x_of = [&](std::size_t i) {
        return steps == 1 ? L + plot_w / 2
                          : L + plot_w * static_cast<double>(i) /
                                    static_cast<double>(steps - 1);
    };
    auto y_of = [&](double acc) { return T + plot_h * (1.0 - acc / 100.0); };

    static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                     "#9467bd", "#ff7f0e", "#8c564b",
                                     "#17becf", "#7f7f7f"};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H
        << "\">\n";
    svg << "<rect width=\"" << W << "\" height=\"" << H
        << "\" fill=\"white\"/>\n";
    for (int g = 0; g <= 100; g += 25) {
        const double y = y_of(g);
        svg << "<line x1=\"" << L << "\" y1=\"" << y << "\" x2=\"" << W - R
            << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
        svg << "<text x=\"" << L - 8 << "\" y=\"" << y + 4
            << "\" font-size=\"11\" text-anchor=\"end\" "
               "font-family=\"sans-serif\">"
            << g << "</text>\n";
    }
    for (std::size_t i = 0; i < steps; ++i) {
        const double x = x_of(i);
        svg << "<text x=\"" << x << "\" y=\"" << H - B + 16
            << "\" font-size=\"11\" text-anchor=\"middle\" "
               "font-family=\"sans-serif\">"
            << (i + 1) << "</text>\n";
    }
    svg << "<text x=\"" << L + plot_w / 2 << "\" y=\"" << H - 12
        << "\" font-size=\"12\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\">tasks seen</text>\n";
    svg << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L
        << "\" y2=\"" << H - B << "\" stroke=\"#333333\"/>\n";
    svg << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R
        << "\" y2=\"" << H - B << "\" stroke=\"#333333\"/>\n";

    for (std::size_t c = 0; c < curves.size(); ++c) {
        const char* color = kPalette[c % (sizeof(kPalette) / sizeof(*kPalette))];
        svg << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < curves[c].values.size(); ++i)
            svg << x_of(i) << "," << y_of(curves[c].values[i]) << " ";
        svg << "\"/>\n";
        const double ly = T + 14 + 16 * static_cast<double>(c);
        svg << "<rect x=\"" << L + 10 << "\" y=\"" << ly - 9
            << "\" width=\"12\" height=\"4\" fill=\"" << color << "\"/>\n";
        svg << "<text x=\"" << L + 28 << "\" y=\"" << ly
            << "\" font-size=\"11\" font-family=\"sans-serif\">"
            << curves[c].label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace mmcl
