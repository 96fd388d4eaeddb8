#include "mmcl/datagen.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mmcl/kernels.hpp"
#include "mmcl/rng.hpp"

namespace mmcl {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("generate_synthetic: " + what);
}

void require_std(double v, const char* name) {
    require(std::isfinite(v) && v >= 0.0,
            std::string(name) + " must be finite and >= 0");
}

// Columns of a dim x cols standard-normal matrix, orthonormalized by
// modified Gram-Schmidt. Row-major.
std::vector<double> orthonormal_columns(Rng& rng, int dim, int cols) {
    std::vector<double> m(static_cast<std::size_t>(dim) * cols);
    rng.fill_normal(m.data(), m.size());
    for (int j = 0; j < cols; ++j) {
        for (int p = 0; p < j; ++p) {
            double proj = 0.0;
            for (int r = 0; r < dim; ++r)
                proj += m[r * cols + j] * m[r * cols + p];
            for (int r = 0; r < dim; ++r)
                m[r * cols + j] -= proj * m[r * cols + p];
        }
        double norm2 = 0.0;
        for (int r = 0; r < dim; ++r)
            norm2 += m[r * cols + j] * m[r * cols + j];
        const double inv = 1.0 / std::sqrt(norm2);
        for (int r = 0; r < dim; ++r) m[r * cols + j] *= inv;
    }
    return m;
}

// view = M * latent, M is dim x latent_dim row-major.
std::vector<double> project(const std::vector<double>& m, int dim,
                            const double* latent, int latent_dim) {
    std::vector<double> out(dim);
    for (int r = 0; r < dim; ++r)
        out[r] = kernels::dot(&m[static_cast<std::size_t>(r) * latent_dim],
                              latent, latent_dim);
    return out;
}

struct ViewPlan {
    std::vector<std::vector<double>> class_protos;  // per class, view space
    std::vector<std::vector<double>> task_shifts;   // per shift task
    double noise_std = 0.0;
    int dim = 0;
};

void emit_split(std::vector<PairedExample>& out, const SyntheticDatasetSpec& s,
                const ViewPlan& audio, const ViewPlan& visual,
                int samples_per_class, Rng& noise_a, Rng& noise_v) {
    std::vector<double> na(audio.dim), nv(visual.dim);
    for (int c = 0; c < s.num_classes; ++c) {
        const int super = static_cast<int>(
            (static_cast<long long>(c) * s.num_superlabels) / s.num_classes);
        for (int i = 0; i < samples_per_class; ++i) {
            const int t = i % s.num_shift_tasks;
            PairedExample ex;
            ex.label = c;
            ex.superlabel = super;
            ex.task_id = t;
            noise_a.fill_normal(na.data(), na.size());
            noise_v.fill_normal(nv.data(), nv.size());
            ex.audio.resize(audio.dim);
            for (int d = 0; d < audio.dim; ++d)
                ex.audio[d] = audio.class_protos[c][d] +
                              audio.task_shifts[t][d] +
                              audio.noise_std * na[d];
            ex.visual.resize(visual.dim);
            for (int d = 0; d < visual.dim; ++d)
                ex.visual[d] = visual.class_protos[c][d] +
                               visual.task_shifts[t][d] +
                               visual.noise_std * nv[d];
            out.push_back(std::move(ex));
        }
    }
}

}  // namespace

Dataset generate_synthetic(const SyntheticDatasetSpec& s) {
    require(s.num_classes >= 1, "num_classes must be >= 1");
    require(s.samples_per_class_train >= 1,
            "samples_per_class_train must be >= 1");
    require(s.samples_per_class_test >= 1,
            "samples_per_class_test must be >= 1");
    require(s.dim_audio >= 1 && s.dim_visual >= 1, "dims must be >= 1");
    require(s.num_shift_tasks >= 1, "num_shift_tasks must be >= 1");
    require(s.num_superlabels >= 1 && s.num_superlabels <= s.num_classes,
            "num_superlabels must be in [1, num_classes]");
    require(std::isfinite(s.prototype_scale), "prototype_scale must be finite");
    require_std(s.noise_std_a, "noise_std_a");
    require_std(s.noise_std_v, "noise_std_v");
    require_std(s.shift_std_a, "shift_std_a");
    require_std(s.shift_std_v, "shift_std_v");
    require(std::isfinite(s.cross_modal_informativeness) &&
                s.cross_modal_informativeness >= 0.0 &&
                s.cross_modal_informativeness <= 1.0,
            "cross_modal_informativeness must be in [0,1]");

    const int latent_dim = std::min(s.dim_audio, s.dim_visual);
    Rng root(s.seed);

    // Per-class latents: a shared part plus one private part per modality,
    // mixed by cross_modal_informativeness.
    Rng proto_shared = root.fork(1);
    Rng proto_audio = root.fork(2);
    Rng proto_visual = root.fork(3);
    const double w_shared = std::sqrt(s.cross_modal_informativeness);
    const double w_priv = std::sqrt(1.0 - s.cross_modal_informativeness);

    std::vector<double> shared(latent_dim), priv(latent_dim);
    std::vector<std::vector<double>> latent_a(s.num_classes),
        latent_v(s.num_classes);
    for (int c = 0; c < s.num_classes; ++c) {
        proto_shared.fill_normal(shared.data(), shared.size());
        latent_a[c].resize(latent_dim);
        latent_v[c].resize(latent_dim);
        proto_audio.fill_normal(priv.data(), priv.size());
        for (int d = 0; d < latent_dim; ++d)
            latent_a[c][d] =
                s.prototype_scale * (w_shared * shared[d] + w_priv * priv[d]);
        proto_visual.fill_normal(priv.data(), priv.size());
        for (int d = 0; d < latent_dim; ++d)
            latent_v[c][d] =
                s.prototype_scale * (w_shared * shared[d] + w_priv * priv[d]);
    }

    Rng map_a_rng = root.fork(4);
    Rng map_b_rng = root.fork(5);
    const auto map_a = orthonormal_columns(map_a_rng, s.dim_audio, latent_dim);
    const auto map_b = orthonormal_columns(map_b_rng, s.dim_visual, latent_dim);

    ViewPlan audio, visual;
    audio.dim = s.dim_audio;
    visual.dim = s.dim_visual;
    audio.noise_std = s.noise_std_a;
    visual.noise_std = s.noise_std_v;
    for (int c = 0; c < s.num_classes; ++c) {
        audio.class_protos.push_back(
            project(map_a, s.dim_audio, latent_a[c].data(), latent_dim));
        visual.class_protos.push_back(
            project(map_b, s.dim_visual, latent_v[c].data(), latent_dim));
    }

    Rng shift_a_rng = root.fork(6);
    Rng shift_v_rng = root.fork(7);
    for (int t = 0; t < s.num_shift_tasks; ++t) {
        std::vector<double> sa(s.dim_audio), sv(s.dim_visual);
        shift_a_rng.fill_normal(sa.data(), sa.size());
        shift_v_rng.fill_normal(sv.data(), sv.size());
        for (double& x : sa) x *= s.shift_std_a;
        for (double& x : sv) x *= s.shift_std_v;
        audio.task_shifts.push_back(std::move(sa));
        visual.task_shifts.push_back(std::move(sv));
    }

    Dataset ds;
    ds.info = {s.num_classes, s.num_superlabels, s.dim_audio, s.dim_visual};
    Rng train_na = root.fork(8), train_nv = root.fork(9);
    Rng test_na = root.fork(10), test_nv = root.fork(11);
    emit_split(ds.train, s, audio, visual, s.samples_per_class_train, train_na,
               train_nv);
    emit_split(ds.test, s, audio, visual, s.samples_per_class_test, test_na,
               test_nv);
    return ds;
}

// ---------------------------------------------------------------------------
// Manifest I/O
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

void write_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

bool read_u32_le(std::istream& is, std::uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = static_cast<std::uint32_t>(b[0]) |
        (static_cast<std::uint32_t>(b[1]) << 8) |
        (static_cast<std::uint32_t>(b[2]) << 16) |
        (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
}

void write_feature_file(const std::filesystem::path& path,
                        const std::vector<double>& values) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw ManifestError(ManifestErrorKind::Io,
                            "cannot write feature file " + path.string());
    write_u32_le(os, 1u);
    write_u32_le(os, static_cast<std::uint32_t>(values.size()));
    for (double v : values)
        write_u32_le(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    if (!os)
        throw ManifestError(ManifestErrorKind::Io,
                            "short write on " + path.string());
}

std::vector<double> read_feature_file(const std::filesystem::path& path,
                                      int expected_dim, int record_index) {
    const std::string where =
        "record " + std::to_string(record_index) + ": " + path.string();
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw ManifestError(ManifestErrorKind::MissingFeatureFile,
                            "missing feature file, " + where);
    std::uint32_t count = 0, dim = 0;
    if (!read_u32_le(is, count) || !read_u32_le(is, dim))
        throw ManifestError(ManifestErrorKind::BadFeatureFile,
                            "truncated feature header, " + where);
    if (count != 1)
        throw ManifestError(
            ManifestErrorKind::BadFeatureFile,
            "expected a single feature row, got count=" +
                std::to_string(count) + ", " + where);
    if (static_cast<int>(dim) != expected_dim)
        throw ManifestError(
            ManifestErrorKind::DimensionMismatch,
            "feature dim " + std::to_string(dim) + " != declared " +
                std::to_string(expected_dim) + ", " + where);
    std::vector<double> out(dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
        std::uint32_t bits = 0;
        if (!read_u32_le(is, bits))
            throw ManifestError(ManifestErrorKind::BadFeatureFile,
                                "truncated feature data, " + where);
        const float f = std::bit_cast<float>(bits);
        if (!std::isfinite(f))
            throw ManifestError(ManifestErrorKind::BadFeatureFile,
                                "non-finite feature value, " + where);
        out[i] = static_cast<double>(f);
    }
    return out;
}

int require_int_field(const json& j, const char* key, const std::string& where,
                      ManifestErrorKind kind) {
    if (!j.contains(key) || !j[key].is_number_integer())
        throw ManifestError(kind, where + ": missing integer field '" +
                                      std::string(key) + "'");
    return j[key].get<int>();
}

std::string require_str_field(const json& j, const char* key,
                              const std::string& where) {
    if (!j.contains(key) || !j[key].is_string())
        throw ManifestError(ManifestErrorKind::BadRecord,
                            where + ": missing string field '" +
                                std::string(key) + "'");
    return j[key].get<std::string>();
}

}  // namespace

ManifestData load_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is)
        throw ManifestError(ManifestErrorKind::Io,
                            "cannot open manifest " + manifest_path.string());
    const auto base = manifest_path.parent_path();

    ManifestData data;
    std::string line;
    bool have_header = false;
    int record_index = 0;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            const auto kind = have_header ? ManifestErrorKind::BadRecord
                                          : ManifestErrorKind::BadHeader;
            const std::string where =
                have_header ? "record " + std::to_string(record_index + 1)
                            : "header";
            throw ManifestError(kind, where + ": " + e.what());
        }
        if (!have_header) {
            data.info.num_classes = require_int_field(
                j, "num_classes", "header", ManifestErrorKind::BadHeader);
            data.info.num_superlabels = require_int_field(
                j, "num_superlabels", "header", ManifestErrorKind::BadHeader);
            data.info.dim_audio = require_int_field(
                j, "dim_audio", "header", ManifestErrorKind::BadHeader);
            data.info.dim_visual = require_int_field(
                j, "dim_visual", "header", ManifestErrorKind::BadHeader);
            if (data.info.num_classes < 0 || data.info.num_superlabels < 1 ||
                data.info.dim_audio < 1 || data.info.dim_visual < 1)
                throw ManifestError(ManifestErrorKind::BadHeader,
                                    "header: fields out of range");
            have_header = true;
            continue;
        }
        ++record_index;
        const std::string where = "record " + std::to_string(record_index);
        PairedExample ex;
        ex.label =
            require_int_field(j, "label", where, ManifestErrorKind::BadRecord);
        ex.superlabel = require_int_field(j, "superlabel", where,
                                          ManifestErrorKind::BadRecord);
        if (ex.label < 0 || ex.label >= data.info.num_classes)
            throw ManifestError(ManifestErrorKind::LabelOutOfRange,
                                where + ": label " + std::to_string(ex.label) +
                                    " outside [0, " +
                                    std::to_string(data.info.num_classes) +
                                    ")");
        if (ex.superlabel < 0 || ex.superlabel >= data.info.num_superlabels)
            throw ManifestError(
                ManifestErrorKind::SuperlabelOutOfRange,
                where + ": superlabel " + std::to_string(ex.superlabel) +
                    " outside [0, " +
                    std::to_string(data.info.num_superlabels) + ")");
        const auto audio_path = base / require_str_field(j, "audio_path", where);
        const auto visual_path =
            base / require_str_field(j, "visual_path", where);
        ex.audio =
            read_feature_file(audio_path, data.info.dim_audio, record_index);
        ex.visual =
            read_feature_file(visual_path, data.info.dim_visual, record_index);
        data.examples.push_back(std::move(ex));
    }
    return data;
}

void save_manifest(const DatasetInfo& info,
                   const std::vector<PairedExample>& examples,
                   const std::filesystem::path& manifest_path,
                   const std::string& features_subdir,
                   const std::string& prefix) {
    const auto base = manifest_path.parent_path();
    const auto feat_dir = base / features_subdir;
    std::filesystem::create_directories(feat_dir);

    std::ofstream os(manifest_path);
    if (!os)
        throw ManifestError(ManifestErrorKind::Io,
                            "cannot write manifest " + manifest_path.string());
    json header;
    header["num_classes"] = info.num_classes;
    header["num_superlabels"] = info.num_superlabels;
    header["dim_audio"] = info.dim_audio;
    header["dim_visual"] = info.dim_visual;
    os << header.dump() << "\n";

    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        const std::string a_name =
            prefix + "_a_" + std::to_string(i) + ".bin";
        const std::string v_name =
            prefix + "_v_" + std::to_string(i) + ".bin";
        write_feature_file(feat_dir / a_name, ex.audio);
        write_feature_file(feat_dir / v_name, ex.visual);
        json rec;
        rec["audio_path"] = features_subdir + "/" + a_name;
        rec["visual_path"] = features_subdir + "/" + v_name;
        rec["label"] = ex.label;
        rec["superlabel"] = ex.superlabel;
        os << rec.dump() << "\n";
    }
    if (!os)
        throw ManifestError(ManifestErrorKind::Io,
                            "short write on " + manifest_path.string());
}

Dataset load_dataset_from_manifests(const std::filesystem::path& train_path,
                                    const std::filesystem::path& test_path) {
    ManifestData train = load_manifest(train_path);
    ManifestData test = load_manifest(test_path);
    if (train.info.num_classes != test.info.num_classes ||
        train.info.num_superlabels != test.info.num_superlabels ||
        train.info.dim_audio != test.info.dim_audio ||
        train.info.dim_visual != test.info.dim_visual)
        throw ManifestError(ManifestErrorKind::BadHeader,
                            "train/test manifest headers disagree");
    Dataset ds;
    ds.info = train.info;
    ds.train = std::move(train.examples);
    ds.test = std::move(test.examples);
    return ds;
}

}  // namespace mmcl
