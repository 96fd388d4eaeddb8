#include "mmcl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>
#include <stdexcept>

namespace mmcl {

const char* method_name(Method m) {
    switch (m) {
        case Method::Samm: return "samm";
        case Method::Er: return "er";
        case Method::Sgd: return "sgd";
        case Method::Joint: return "joint";
    }
    return "?";
}

Method method_from(const std::string& name) {
    if (name == "samm") return Method::Samm;
    if (name == "er") return Method::Er;
    if (name == "sgd") return Method::Sgd;
    if (name == "joint") return Method::Joint;
    throw std::invalid_argument("unknown method '" + name + "'");
}

const char* modality_name(ModalityMode m) {
    switch (m) {
        case ModalityMode::Audio: return "audio";
        case ModalityMode::Visual: return "visual";
        case ModalityMode::Multi: return "multi";
    }
    return "?";
}

ModalityMode modality_from(const std::string& name) {
    if (name == "audio") return ModalityMode::Audio;
    if (name == "visual") return ModalityMode::Visual;
    if (name == "multi") return ModalityMode::Multi;
    throw std::invalid_argument("unknown modality mode '" + name + "'");
}

InferenceMode eval_mode_for(Method method, ModalityMode modality) {
    if (method == Method::Samm) return InferenceMode::Dynamic;
    switch (modality) {
        case ModalityMode::Audio: return InferenceMode::Audio;
        case ModalityMode::Visual: return InferenceMode::Visual;
        case ModalityMode::Multi: return InferenceMode::Multi;
    }
    return InferenceMode::Multi;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start)
        .count();
}

struct Batch {
    Mat audio;
    Mat visual;
    std::vector<int> labels;
    std::vector<std::size_t> sample_indices;  // into Dataset::train
};

Batch gather_batch(const Dataset& dataset, const ScenarioStream& stream,
                   const std::vector<std::size_t>& order, std::size_t begin,
                   std::size_t end) {
    const std::size_t B = end - begin;
    Batch batch;
    batch.audio = Mat(B, dataset.info.dim_audio);
    batch.visual = Mat(B, dataset.info.dim_visual);
    batch.labels.resize(B);
    batch.sample_indices.assign(order.begin() + begin, order.begin() + end);
    for (std::size_t r = 0; r < B; ++r) {
        const PairedExample& ex = dataset.train[batch.sample_indices[r]];
        std::copy(ex.audio.begin(), ex.audio.end(), batch.audio.row(r));
        std::copy(ex.visual.begin(), ex.visual.end(), batch.visual.row(r));
        batch.labels[r] = stream.target_of(ex);
    }
    return batch;
}

BufferBatch gather_buffer_batch(const ReservoirBuffer& buffer, std::size_t k,
                                Rng& rng) {
    BufferBatch out;
    if (buffer.empty() || k == 0) return out;
    const auto picks = buffer.sample(std::min(k, buffer.size()), rng);
    const std::size_t B = picks.size();
    const std::size_t da = picks[0]->audio.size();
    const std::size_t dv = picks[0]->visual.size();
    const std::size_t C = picks[0]->z_av.size();
    out.audio = Mat(B, da);
    out.visual = Mat(B, dv);
    out.z_a = Mat(B, C);
    out.z_v = Mat(B, C);
    out.z_av = Mat(B, C);
    out.labels.resize(B);
    for (std::size_t r = 0; r < B; ++r) {
        const BufferEntry& e = *picks[r];
        std::copy(e.audio.begin(), e.audio.end(), out.audio.row(r));
        std::copy(e.visual.begin(), e.visual.end(), out.visual.row(r));
        std::copy(e.z_a.begin(), e.z_a.end(), out.z_a.row(r));
        std::copy(e.z_v.begin(), e.z_v.end(), out.z_v.row(r));
        std::copy(e.z_av.begin(), e.z_av.end(), out.z_av.row(r));
        out.labels[r] = e.label;
    }
    return out;
}

const Mat& head_logits(const BatchOutput& o, ModalityMode modality) {
    switch (modality) {
        case ModalityMode::Audio: return o.z_a;
        case ModalityMode::Visual: return o.z_v;
        case ModalityMode::Multi: return o.z_av;
    }
    return o.z_av;
}

// Cross entropy on a single head; gradients flow only through that head.
double head_ce_step(const ModelBundle& bundle, const BatchOutput& o,
                    const std::vector<int>& labels, ModalityMode modality,
                    Gradients& grads) {
    const std::size_t B = o.batch_size();
    const std::size_t C = o.z_av.cols();
    Mat dz(B, C);
    const double loss = softmax_cross_entropy(head_logits(o, modality), labels,
                                              &dz, 1.0);
    const Mat none;
    switch (modality) {
        case ModalityMode::Audio:
            backward(bundle, o, dz, none, none, none, none, grads);
            break;
        case ModalityMode::Visual:
            backward(bundle, o, none, dz, none, none, none, grads);
            break;
        case ModalityMode::Multi:
            backward(bundle, o, none, none, dz, none, none, grads);
            break;
    }
    return loss;
}

void observe_batch(ReservoirBuffer& buffer, const Batch& batch,
                   const BatchOutput& o, const Dataset& dataset) {
    const std::size_t C = o.z_av.cols();
    for (std::size_t r = 0; r < batch.labels.size(); ++r) {
        const PairedExample& ex = dataset.train[batch.sample_indices[r]];
        BufferEntry e;
        e.audio = ex.audio;
        e.visual = ex.visual;
        e.label = batch.labels[r];
        e.z_a.assign(o.z_a.row(r), o.z_a.row(r) + C);
        e.z_v.assign(o.z_v.row(r), o.z_v.row(r) + C);
        e.z_av.assign(o.z_av.row(r), o.z_av.row(r) + C);
        buffer.observe(std::move(e));
    }
}

}  // namespace

double evaluate_task_accuracy(const ModelBundle& bundle, const Dataset& dataset,
                              const ScenarioStream& stream, int task,
                              InferenceMode mode) {
    const auto& idx = stream.tasks.at(task).test_indices;
    if (idx.empty())
        throw std::invalid_argument("evaluate_task_accuracy: empty test set");
    Mat audio(idx.size(), dataset.info.dim_audio);
    Mat visual(idx.size(), dataset.info.dim_visual);
    std::vector<int> targets(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const PairedExample& ex = dataset.test[idx[r]];
        std::copy(ex.audio.begin(), ex.audio.end(), audio.row(r));
        std::copy(ex.visual.begin(), ex.visual.end(), visual.row(r));
        targets[r] = stream.target_of(ex);
    }
    const BatchOutput out =
        forward(bundle, std::move(audio), std::move(visual));
    const Mat scores = predict_scores(bundle, out, mode);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < idx.size(); ++r)
        if (argmax_lowest(scores.row(r), scores.cols()) == targets[r]) ++hits;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(idx.size());
}

TrainResult train_stream(const Dataset& dataset, const ScenarioStream& stream,
                         const TrainConfig& config, std::ostream* log) {
    if (config.batch_size < 1)
        throw std::invalid_argument("train_stream: batch_size must be >= 1");
    if (config.epochs_per_task < 0)
        throw std::invalid_argument("train_stream: negative epochs_per_task");
    if (stream.tasks.empty())
        throw std::invalid_argument("train_stream: empty scenario stream");

    const Rng root(config.seed);
    const int num_tasks = static_cast<int>(stream.tasks.size());

    ModelConfig mc;
    mc.dim_audio = dataset.info.dim_audio;
    mc.dim_visual = dataset.info.dim_visual;
    mc.num_classes = stream.num_targets;
    mc.hidden_dim = config.hidden_dim;
    mc.feature_dim = config.feature_dim;
    mc.width_multiplier = config.width_multiplier;
    mc.film_audio_conditions_visual = config.film_audio_conditions_visual;
    mc.seed = root.fork(0).seed();

    RunRecord record;
    const bool uses_buffer =
        config.method == Method::Samm || config.method == Method::Er;
    std::size_t capacity = config.buffer_capacity;
    if (!uses_buffer && capacity > 0) {
        record.warnings.push_back(std::string(method_name(config.method)) +
                                  " does not replay; buffer_capacity ignored");
        capacity = 0;
    }

    std::vector<InferenceMode> modes = config.eval_modes;
    if (modes.empty())
        modes.push_back(eval_mode_for(config.method, config.modality));

    TrainResult result{init_model(mc),
                       TaskPerformanceMatrix(num_tasks),
                       modes,
                       std::vector<TaskPerformanceMatrix>(
                           modes.size(), TaskPerformanceMatrix(num_tasks)),
                       std::move(record),
                       ReservoirBuffer(capacity, root.fork(2).seed())};

    Rng shuffle_rng = root.fork(1);
    Rng sample_rng = root.fork(3);
    const std::size_t buffer_k = config.buffer_batch_size > 0
                                     ? static_cast<std::size_t>(
                                           config.buffer_batch_size)
                                     : static_cast<std::size_t>(
                                           config.batch_size);
    const auto t_start = Clock::now();

    // Joint training sees the union of all task streams for the combined
    // epoch budget; everything else visits tasks in order.
    const bool joint = config.method == Method::Joint;
    const int phases = joint ? 1 : num_tasks;

    for (int phase = 0; phase < phases; ++phase) {
        const auto t_task = Clock::now();
        std::vector<std::size_t> pool;
        if (joint) {
            for (const auto& task : stream.tasks)
                pool.insert(pool.end(), task.train_indices.begin(),
                            task.train_indices.end());
        } else {
            pool = stream.tasks[phase].train_indices;
        }

        const int epochs = joint ? config.epochs_per_task * num_tasks
                                 : config.epochs_per_task;
        TaskTrainLog tlog;
        tlog.task = phase;
        LossBreakdown sums;
        double total_sum = 0.0;

        for (int epoch = 0; epoch < epochs; ++epoch) {
            shuffle_rng.shuffle(pool);
            double epoch_sum = 0.0;
            int epoch_steps = 0;
            for (std::size_t begin = 0; begin < pool.size();
                 begin += config.batch_size) {
                const std::size_t end =
                    std::min(begin + config.batch_size, pool.size());
                Batch batch =
                    gather_batch(dataset, stream, pool, begin, end);

                TaskBatch task_batch{std::move(batch.audio),
                                     std::move(batch.visual), batch.labels};
                Gradients grads = make_gradients(result.bundle);
                grads.zero();
                LossBreakdown bd;
                BatchOutput task_out;

                if (config.method == Method::Samm) {
                    const BufferBatch buf = gather_buffer_batch(
                        result.buffer, buffer_k, sample_rng);
                    bd = total_loss(result.bundle, task_batch, buf,
                                    config.weights, &grads, false, &task_out);
                } else {
                    task_out = forward(result.bundle, task_batch.audio,
                                       task_batch.visual);
                    bd.supervised_task = head_ce_step(
                        result.bundle, task_out, task_batch.labels,
                        config.modality, grads);
                    if (config.method == Method::Er) {
                        const BufferBatch buf = gather_buffer_batch(
                            result.buffer, buffer_k, sample_rng);
                        if (!buf.empty()) {
                            const BatchOutput bo = forward(
                                result.bundle, buf.audio, buf.visual);
                            bd.supervised_buffer = head_ce_step(
                                result.bundle, bo, buf.labels,
                                config.modality, grads);
                        }
                    }
                }

                // New stream data enters the reservoir once (first epoch),
                // carrying the logits computed before this update.
                if (capacity > 0 && epoch == 0)
                    observe_batch(result.buffer, batch, task_out, dataset);

                sgd_update(result.bundle, grads, config.lr);

                sums.supervised_task += bd.supervised_task;
                sums.supervised_buffer += bd.supervised_buffer;
                sums.consistency += bd.consistency;
                sums.alignment_task += bd.alignment_task;
                sums.alignment_buffer += bd.alignment_buffer;
                const double step_total = bd.total(config.weights.beta);
                total_sum += step_total;
                epoch_sum += step_total;
                ++epoch_steps;
                ++tlog.steps;
            }
            if (log && epoch_steps > 0) {
                *log << "task " << phase << " epoch " << (epoch + 1) << "/"
                     << epochs << " mean_loss " << epoch_sum / epoch_steps
                     << "\n";
            }
        }

        if (tlog.steps > 0) {
            const double inv = 1.0 / tlog.steps;
            tlog.mean_loss.supervised_task = sums.supervised_task * inv;
            tlog.mean_loss.supervised_buffer = sums.supervised_buffer * inv;
            tlog.mean_loss.consistency = sums.consistency * inv;
            tlog.mean_loss.alignment_task = sums.alignment_task * inv;
            tlog.mean_loss.alignment_buffer = sums.alignment_buffer * inv;
            tlog.mean_total = total_sum * inv;
        }

        // Refresh temperatures from replayed data before scoring; the
        // ensemble weights depend on them.
        if (config.method == Method::Samm && config.calibrate &&
            !result.buffer.empty()) {
            calibrate(result.bundle, result.buffer.entries());
        }
        tlog.calibration = {result.bundle.t_a, result.bundle.t_v,
                            result.bundle.t_av};

        const int row = joint ? num_tasks - 1 : phase;
        for (std::size_t m = 0; m < modes.size(); ++m) {
            for (int j = 0; j <= row; ++j) {
                const double acc = evaluate_task_accuracy(
                    result.bundle, dataset, stream, j, modes[m]);
                result.matrices[m].set(row, j, acc);
                if (log)
                    *log << "task " << row << " eval task " << j << " mode "
                         << inference_mode_name(modes[m]) << " acc " << acc
                         << "\n";
            }
        }

        tlog.wall_ms = ms_since(t_task);
        result.record.tasks.push_back(std::move(tlog));
    }

    result.matrix = result.matrices.front();
    result.record.train_wall_ms = ms_since(t_start);
    return result;
}

}  // namespace mmcl
