#include "mmcl/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mmcl/rng.hpp"

namespace mmcl {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("scenario: " + what);
}

// Assigns every dataset index to the task owning its class (-1 = unused).
void fill_indices_by_class(const Dataset& ds, const std::vector<int>& task_of,
                           std::vector<ScenarioTask>& tasks) {
    for (std::size_t i = 0; i < ds.train.size(); ++i) {
        const int t = task_of[ds.train[i].label];
        if (t >= 0) tasks[t].train_indices.push_back(i);
    }
    for (std::size_t i = 0; i < ds.test.size(); ++i) {
        const int t = task_of[ds.test[i].label];
        if (t >= 0) tasks[t].test_indices.push_back(i);
    }
}

}  // namespace

ScenarioStream build_seq(const Dataset& ds, const ScenarioSpec& spec) {
    require(spec.kind == ScenarioKind::Seq, "build_seq requires kind SEQ");
    require(spec.num_tasks >= 1, "num_tasks must be >= 1");
    require(spec.classes_per_task >= 1, "classes_per_task must be >= 1");
    const int used = spec.num_tasks * spec.classes_per_task;
    require(used <= ds.info.num_classes,
            "num_tasks * classes_per_task exceeds num_classes");

    std::vector<int> order(ds.info.num_classes);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(spec.seed);
    rng.shuffle(order);

    ScenarioStream st;
    st.kind = ScenarioKind::Seq;
    st.target_kind = TargetKind::ClassLabel;
    st.num_targets = used;
    st.class_to_target.assign(ds.info.num_classes, -1);
    st.target_to_task.resize(used);
    st.tasks.resize(spec.num_tasks);

    std::vector<int> task_of(ds.info.num_classes, -1);
    for (int p = 0; p < used; ++p) {
        const int c = order[p];
        const int t = p / spec.classes_per_task;
        st.class_to_target[c] = p;
        st.target_to_task[p] = t;
        st.tasks[t].classes.push_back(c);
        task_of[c] = t;
    }
    fill_indices_by_class(ds, task_of, st.tasks);
    return st;
}

ScenarioStream build_dom(const Dataset& ds, const ScenarioSpec& spec) {
    require(spec.kind == ScenarioKind::Dom, "build_dom requires kind DOM");
    require(spec.num_tasks >= 1, "num_tasks must be >= 1");
    require(spec.subclasses_per_task_per_super >= 1,
            "subclasses_per_task_per_super must be >= 1");
    const int supers = ds.info.num_superlabels;
    require(supers >= 1, "dataset declares no supercategories");

    // Class -> supercategory map, checked for consistency across samples.
    std::vector<int> super_of(ds.info.num_classes, -1);
    auto note = [&](const PairedExample& ex) {
        require(ex.superlabel >= 0 && ex.superlabel < supers,
                "sample superlabel out of range");
        if (super_of[ex.label] == -1)
            super_of[ex.label] = ex.superlabel;
        else
            require(super_of[ex.label] == ex.superlabel,
                    "class " + std::to_string(ex.label) +
                        " maps to multiple supercategories");
    };
    for (const auto& ex : ds.train) note(ex);
    for (const auto& ex : ds.test) note(ex);

    std::vector<std::vector<int>> members(supers);
    for (int c = 0; c < ds.info.num_classes; ++c)
        if (super_of[c] >= 0) members[super_of[c]].push_back(c);

    const int k = spec.subclasses_per_task_per_super;
    const int need = spec.num_tasks * k;
    Rng root(spec.seed);
    for (int s = 0; s < supers; ++s) {
        require(static_cast<int>(members[s].size()) >= need,
                "supercategory " + std::to_string(s) + " has " +
                    std::to_string(members[s].size()) + " subclasses, needs " +
                    std::to_string(need));
        Rng sub = root.fork(static_cast<std::uint64_t>(s));
        sub.shuffle(members[s]);
    }

    ScenarioStream st;
    st.kind = ScenarioKind::Dom;
    st.target_kind = TargetKind::SuperLabel;
    st.num_targets = supers;
    st.class_to_target.assign(ds.info.num_classes, -1);
    st.target_to_task.assign(supers, 0);
    st.tasks.resize(spec.num_tasks);

    std::vector<int> task_of(ds.info.num_classes, -1);
    for (int t = 0; t < spec.num_tasks; ++t) {
        for (int s = 0; s < supers; ++s) {
            for (int i = 0; i < k; ++i) {
                const int c = members[s][t * k + i];
                st.tasks[t].classes.push_back(c);
                st.class_to_target[c] = s;
                task_of[c] = t;
            }
        }
        std::sort(st.tasks[t].classes.begin(), st.tasks[t].classes.end());
    }
    fill_indices_by_class(ds, task_of, st.tasks);
    return st;
}

ScenarioStream build_gcil(const Dataset& ds, const ScenarioSpec& spec) {
    require(spec.kind == ScenarioKind::Gcil, "build_gcil requires kind GCIL");
    require(!ds.train.empty(), "empty dataset");
    require(spec.num_tasks >= 1, "num_tasks must be >= 1");
    require(spec.gcil_samples_per_task >= 1,
            "gcil_samples_per_task must be >= 1");
    const int num_classes = ds.info.num_classes;
    require(spec.gcil_max_classes_per_task >= 1 &&
                spec.gcil_max_classes_per_task <= num_classes,
            "gcil_max_classes_per_task must be in [1, num_classes]");
    require(std::isfinite(spec.gcil_power_exponent),
            "gcil_power_exponent must be finite");

    Rng root(spec.seed);

    // Seed-fixed global ranking drives the long-tail weights.
    std::vector<int> ranking(num_classes);
    std::iota(ranking.begin(), ranking.end(), 0);
    Rng rank_rng = root.fork(1);
    rank_rng.shuffle(ranking);
    std::vector<double> weight(num_classes);
    for (int i = 0; i < num_classes; ++i)
        weight[ranking[i]] =
            std::pow(static_cast<double>(i + 1), -spec.gcil_power_exponent);

    // Per-class sample pools, consumed without replacement across tasks.
    std::vector<std::vector<std::size_t>> pool(num_classes);
    for (std::size_t i = 0; i < ds.train.size(); ++i)
        pool[ds.train[i].label].push_back(i);
    std::vector<std::size_t> cursor(num_classes, 0);
    for (int c = 0; c < num_classes; ++c) {
        Rng prng = root.fork(100 + static_cast<std::uint64_t>(c));
        prng.shuffle(pool[c]);
    }

    std::vector<std::vector<std::size_t>> test_by_class(num_classes);
    for (std::size_t i = 0; i < ds.test.size(); ++i)
        test_by_class[ds.test[i].label].push_back(i);

    ScenarioStream st;
    st.kind = ScenarioKind::Gcil;
    st.target_kind = TargetKind::ClassLabel;
    st.num_targets = num_classes;
    st.class_to_target.resize(num_classes);
    std::iota(st.class_to_target.begin(), st.class_to_target.end(), 0);
    st.target_to_task.assign(num_classes, -1);
    st.tasks.resize(spec.num_tasks);

    std::vector<int> all_classes(num_classes);
    std::iota(all_classes.begin(), all_classes.end(), 0);

    for (int t = 0; t < spec.num_tasks; ++t) {
        Rng trng = root.fork(1000 + static_cast<std::uint64_t>(t));
        const int k =
            1 + static_cast<int>(trng.uniform_index(
                    static_cast<std::size_t>(spec.gcil_max_classes_per_task)));

        // k distinct classes via a partial Fisher-Yates draw.
        std::vector<int> deck = all_classes;
        std::vector<int> chosen(k);
        for (int i = 0; i < k; ++i) {
            const std::size_t j =
                i + trng.uniform_index(deck.size() - static_cast<std::size_t>(i));
            std::swap(deck[i], deck[j]);
            chosen[i] = deck[i];
        }
        std::sort(chosen.begin(), chosen.end());

        const int n = spec.gcil_samples_per_task;
        std::vector<int> counts(k, 0);
        if (spec.gcil_distribution == GcilDistribution::Uniform) {
            const int base = n / k;
            const int rem = n % k;
            for (int i = 0; i < k; ++i) counts[i] = base + (i < rem ? 1 : 0);
        } else {
            double wsum = 0.0;
            for (int c : chosen) wsum += weight[c];
            // Largest-remainder apportionment, ties to the lower class id.
            std::vector<double> frac(k);
            int assigned = 0;
            for (int i = 0; i < k; ++i) {
                const double share = n * weight[chosen[i]] / wsum;
                counts[i] = static_cast<int>(std::floor(share));
                frac[i] = share - counts[i];
                assigned += counts[i];
            }
            std::vector<int> idx(k);
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
                return frac[a] > frac[b];
            });
            for (int r = 0; r < n - assigned; ++r) ++counts[idx[r]];
        }

        auto& task = st.tasks[t];
        for (int i = 0; i < k; ++i) {
            const int c = chosen[i];
            if (counts[i] == 0) continue;
            task.classes.push_back(c);
            if (st.target_to_task[c] == -1) st.target_to_task[c] = t;
            for (int s = 0; s < counts[i]; ++s) {
                if (cursor[c] < pool[c].size()) {
                    task.train_indices.push_back(pool[c][cursor[c]++]);
                } else {
                    require(!pool[c].empty(),
                            "class " + std::to_string(c) + " has no samples");
                    task.train_indices.push_back(
                        pool[c][trng.uniform_index(pool[c].size())]);
                    st.sampled_with_replacement = true;
                }
            }
            for (std::size_t ti : test_by_class[c])
                task.test_indices.push_back(ti);
        }
    }
    return st;
}

ScenarioStream build_stream(const Dataset& ds, const ScenarioSpec& spec) {
    switch (spec.kind) {
        case ScenarioKind::Seq: return build_seq(ds, spec);
        case ScenarioKind::Dom: return build_dom(ds, spec);
        case ScenarioKind::Gcil: return build_gcil(ds, spec);
    }
    throw std::invalid_argument("scenario: unknown kind");
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

using nlohmann::ordered_json;

const char* kind_name(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::Seq: return "seq";
        case ScenarioKind::Dom: return "dom";
        case ScenarioKind::Gcil: return "gcil";
    }
    return "?";
}

ScenarioKind kind_from(const std::string& s) {
    if (s == "seq") return ScenarioKind::Seq;
    if (s == "dom") return ScenarioKind::Dom;
    if (s == "gcil") return ScenarioKind::Gcil;
    throw std::invalid_argument("stream file: unknown kind '" + s + "'");
}

}  // namespace

void save_stream(const ScenarioStream& st, const std::filesystem::path& path) {
    ordered_json j;
    j["kind"] = kind_name(st.kind);
    j["target_kind"] =
        st.target_kind == TargetKind::SuperLabel ? "super_label" : "class_label";
    j["num_targets"] = st.num_targets;
    j["class_to_target"] = st.class_to_target;
    j["target_to_task"] = st.target_to_task;
    j["sampled_with_replacement"] = st.sampled_with_replacement;
    j["tasks"] = ordered_json::array();
    for (const auto& t : st.tasks) {
        ordered_json tj;
        tj["classes"] = t.classes;
        tj["train_indices"] = t.train_indices;
        tj["test_indices"] = t.test_indices;
        j["tasks"].push_back(std::move(tj));
    }
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot write stream file " + path.string());
    os << j.dump(2) << "\n";
}

ScenarioStream load_stream(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is)
        throw std::runtime_error("cannot open stream file " + path.string());
    ordered_json j = ordered_json::parse(is);
    ScenarioStream st;
    st.kind = kind_from(j.at("kind").get<std::string>());
    st.target_kind = j.at("target_kind").get<std::string>() == "super_label"
                         ? TargetKind::SuperLabel
                         : TargetKind::ClassLabel;
    st.num_targets = j.at("num_targets").get<int>();
    st.class_to_target = j.at("class_to_target").get<std::vector<int>>();
    st.target_to_task = j.at("target_to_task").get<std::vector<int>>();
    st.sampled_with_replacement = j.at("sampled_with_replacement").get<bool>();
    for (const auto& tj : j.at("tasks")) {
        ScenarioTask t;
        t.classes = tj.at("classes").get<std::vector<int>>();
        t.train_indices =
            tj.at("train_indices").get<std::vector<std::size_t>>();
        t.test_indices = tj.at("test_indices").get<std::vector<std::size_t>>();
        st.tasks.push_back(std::move(t));
    }
    return st;
}

}  // namespace mmcl
