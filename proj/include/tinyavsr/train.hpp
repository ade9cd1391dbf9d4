#pragma once

// Training loop and evaluation: AdamW over the trainable subset (projectors +
// LoRA), cosine annealing with linear warmup, SNR-randomized babble injection
// and time masking at train time, beam-search WER evaluation, and the sweep
// drivers behind the CLI.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tinyavsr/common.hpp"
#include "tinyavsr/data.hpp"
#include "tinyavsr/decoding.hpp"
#include "tinyavsr/model.hpp"
#include "tinyavsr/wer.hpp"

namespace avsr {

struct TrainConfig {
    double lr_peak = 0.0;  // 0 resolves to the task default: 1e-3 ASR/AVSR, 5e-4 VSR
    double weight_decay = 0.1;
    int epochs = 10;
    int batch_size = 16;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double warmup_fraction = 0.03;
    double grad_clip_norm = 0.0;  // 0 = off
    uint64_t seed = 1;

    bool noise_enabled = false;
    NoiseSpec noise;
    double time_mask_rho = 0.3;  // train-time only; 0 disables

    double resolved_lr(Task task) const {
        if (lr_peak > 0) return lr_peak;
        return task == Task::kVsr ? 5e-4 : 1e-3;
    }

    void validate() const {
        if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
        if (warmup_fraction < 0 || warmup_fraction >= 1) {
            throw ConfigError("train: warmup_fraction must be in [0, 1)");
        }
        if (time_mask_rho < 0 || time_mask_rho >= 1) {
            throw ConfigError("train: time_mask_rho must be in [0, 1)");
        }
    }
};

// Linear warmup to lr_peak over warmup_fraction*total_steps, then cosine decay
// to zero at total_steps.
inline double cosine_lr(int64_t step, int64_t total_steps, double lr_peak,
                        double warmup_fraction) {
    if (step < 0 || total_steps < 1 || step > total_steps) {
        throw ParamError("cosine_lr: step outside [0, total_steps]");
    }
    const int64_t warmup_steps = static_cast<int64_t>(warmup_fraction * total_steps);
    if (step < warmup_steps) {
        return lr_peak * static_cast<double>(step) / static_cast<double>(warmup_steps);
    }
    const double progress = total_steps == warmup_steps
                                ? 1.0
                                : static_cast<double>(step - warmup_steps) /
                                      static_cast<double>(total_steps - warmup_steps);
    return lr_peak * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

// Decoupled-weight-decay Adam over an explicit list of trainable parameters.
template <typename T>
class AdamWT {
public:
    AdamWT(ParamStoreT<T>& store, std::vector<std::string> names, const TrainConfig& cfg)
        : store_(&store), names_(std::move(names)), cfg_(cfg) {
        states_.resize(names_.size());
        for (size_t i = 0; i < names_.size(); ++i) {
            const auto& t = store.at(names_[i]);
            states_[i].m.assign(t.data().size(), T(0));
            states_[i].v.assign(t.data().size(), T(0));
        }
    }

    int64_t step_count() const { return t_; }

    // One update over all registered parameters; missing gradients count as
    // zero. Throws PolicyError if any registered parameter is frozen.
    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

        double clip_scale = 1.0;
        if (cfg_.grad_clip_norm > 0) {
            double sq = 0.0;
            for (const auto& name : names_) {
                const auto& tensor = store_->at(name);
                if (!tensor.has_grad()) continue;
                for (T g : tensor.grad()) sq += static_cast<double>(g) * g;
            }
            const double norm = std::sqrt(sq);
            if (norm > cfg_.grad_clip_norm) clip_scale = cfg_.grad_clip_norm / norm;
        }

        for (size_t i = 0; i < names_.size(); ++i) {
            if (!store_->trainable(names_[i])) {
                throw PolicyError("adamw: step on frozen parameter '" + names_[i] + "'");
            }
            auto& tensor = store_->at(names_[i]);
            auto& data = tensor.mutable_data();
            auto& st = states_[i];
            const bool has_grad = tensor.has_grad();
            const std::vector<T>* grad = has_grad ? &tensor.grad() : nullptr;
            for (size_t j = 0; j < data.size(); ++j) {
                const double g = has_grad ? static_cast<double>((*grad)[j]) * clip_scale : 0.0;
                st.m[j] = static_cast<T>(cfg_.beta1 * st.m[j] + (1.0 - cfg_.beta1) * g);
                st.v[j] = static_cast<T>(cfg_.beta2 * st.v[j] + (1.0 - cfg_.beta2) * g * g);
                const double m_hat = static_cast<double>(st.m[j]) / bc1;
                const double v_hat = static_cast<double>(st.v[j]) / bc2;
                const double update =
                    lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps)) +
                    lr * cfg_.weight_decay * static_cast<double>(data[j]);
                data[j] = static_cast<T>(static_cast<double>(data[j]) - update);
            }
        }
        store_->bump_version();
    }

private:
    struct State {
        std::vector<T> m, v;
    };
    ParamStoreT<T>* store_;
    std::vector<std::string> names_;
    TrainConfig cfg_;
    std::vector<State> states_;
    int64_t t_ = 0;
};

struct EpochMetrics {
    int epoch = 0;
    double mean_loss = 0.0;
    double final_lr = 0.0;
    double wall_s = 0.0;
};

struct FreezeAudit {
    std::vector<std::string> trainable_names;
    int64_t trainable_params = 0;
    int64_t expected_trainable_params = 0;
    int64_t total_params = 0;
    uint64_t frozen_fingerprint_before = 0;
    uint64_t frozen_fingerprint_after = 0;
    bool frozen_bytes_identical = false;
};

struct TrainResult {
    std::vector<EpochMetrics> epochs;
    FreezeAudit audit;
    double wall_s = 0.0;
    int64_t optimizer_steps = 0;
};

namespace detail {

template <typename T>
TensorT<T> preprocess_audio(const Corpus& corpus, const std::vector<size_t>& babble_pool,
                            size_t index, double snr_db, int babble_speakers, Rng& rng) {
    const Utterance& utt = corpus.utterances[index];
    TensorT<T> audio = utt.audio.template astype<T>();
    if (!std::isinf(snr_db)) {
        Tensor32 babble32 =
            make_babble(corpus, babble_pool, index, audio.rows(), babble_speakers, rng);
        audio = mix_noise_at_snr(audio, babble32.template astype<T>(), snr_db);
    }
    return z_normalize(audio);
}

template <typename T>
TensorT<T> preprocess_video(const Utterance& utt) {
    return z_normalize(utt.video.template astype<T>());
}

inline std::string diagnostic_snapshot(int epoch, int64_t step, double loss, double lr,
                                       const std::string& utt_id) {
    std::ostringstream os;
    os << "{\"epoch\": " << epoch << ", \"step\": " << step << ", \"loss\": " << loss
       << ", \"lr\": " << lr << ", \"utterance\": \"" << utt_id << "\"}";
    return os.str();
}

}  // namespace detail

// Full training run over the train split. The optimizer touches only the
// trainable subset; the audit in the result proves the frozen partition was
// untouched at byte level.
template <typename T>
TrainResult train_model(AvsrModelT<T>& model, const Corpus& corpus, const TrainConfig& cfg) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();

    std::vector<size_t> train_idx = corpus.split_indices("train");
    if (train_idx.empty()) throw ConfigError("train: corpus has no train split");

    TrainResult result;
    result.audit.trainable_names = model.params.trainable_names();
    result.audit.trainable_params = model.params.trainable_params();
    result.audit.expected_trainable_params = model.expected_trainable_params();
    result.audit.total_params = model.params.total_params();
    result.audit.frozen_fingerprint_before = model.params.frozen_fingerprint();
    const auto frozen_before = model.params.snapshot_frozen();

    AdamWT<T> optimizer(model.params, model.params.trainable_names(), cfg);
    const int64_t steps_per_epoch =
        (static_cast<int64_t>(train_idx.size()) + cfg.batch_size - 1) / cfg.batch_size;
    const int64_t total_steps = steps_per_epoch * cfg.epochs;

    const double lr_peak = cfg.resolved_lr(model.spec.task);
    Rng order_rng = Rng(cfg.seed).fork(0x0DDE6);
    Rng noise_rng = Rng(cfg.seed).fork(0x8015E);
    Rng mask_rng = Rng(cfg.seed).fork(0x3A5C);

    int64_t opt_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto e_start = std::chrono::steady_clock::now();
        // Fisher-Yates shuffle, explicit for cross-platform determinism
        for (size_t i = train_idx.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(order_rng.uniform_int(0, static_cast<int>(i) - 1));
            std::swap(train_idx[i - 1], train_idx[j]);
        }

        double loss_sum = 0.0;
        int64_t loss_count = 0;
        double lr = 0.0;
        int in_batch = 0;
        model.params.zero_grads();
        for (size_t n = 0; n < train_idx.size(); ++n) {
            const size_t index = train_idx[n];
            const Utterance& utt = corpus.utterances[index];

            std::optional<TensorT<T>> audio, video;
            if (model.spec.uses_audio()) {
                const double snr =
                    cfg.noise_enabled ? cfg.noise.draw_level(noise_rng) : kInfSnr;
                TensorT<T> a = detail::preprocess_audio<T>(corpus, train_idx, index, snr,
                                                           cfg.noise.babble_speakers,
                                                           noise_rng);
                if (cfg.time_mask_rho > 0) a = adaptive_time_mask(a, cfg.time_mask_rho, mask_rng);
                audio = std::move(a);
            }
            if (model.spec.uses_video()) {
                TensorT<T> v = detail::preprocess_video<T>(utt);
                if (cfg.time_mask_rho > 0) v = adaptive_time_mask(v, cfg.time_mask_rho, mask_rng);
                video = std::move(v);
            }

            const std::vector<int> target = model.tokenizer.encode_words(utt.words);
            FusedSequenceT<T> fused = assemble(model, audio, video, target, FuseMode::kTrain);
            TensorT<T> logits = forward_logits(model, fused);
            TensorT<T> loss = response_loss(fused, logits);
            const double loss_value = static_cast<double>(loss.item());
            if (!std::isfinite(loss_value)) {
                throw TrainAbort("train: NaN/Inf loss",
                                 detail::diagnostic_snapshot(epoch, opt_step, loss_value, lr,
                                                             utt.id));
            }
            loss_sum += loss_value;
            ++loss_count;

            scale(loss, T(1) / static_cast<T>(cfg.batch_size)).backward();
            ++in_batch;
            if (in_batch == cfg.batch_size || n + 1 == train_idx.size()) {
                lr = cosine_lr(std::min(opt_step + 1, total_steps), total_steps, lr_peak,
                               cfg.warmup_fraction);
                optimizer.step(lr);
                model.params.zero_grads();
                ++opt_step;
                in_batch = 0;
            }
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.mean_loss = loss_sum / static_cast<double>(std::max<int64_t>(1, loss_count));
        em.final_lr = lr;
        em.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - e_start)
                        .count();
        result.epochs.push_back(em);
    }

    result.optimizer_steps = opt_step;
    result.audit.frozen_fingerprint_after = model.params.frozen_fingerprint();
    result.audit.frozen_bytes_identical =
        model.params.snapshot_frozen() == frozen_before &&
        result.audit.frozen_fingerprint_after == result.audit.frozen_fingerprint_before;
    result.wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

// --- evaluation ---------------------------------------------------------------------

struct EvalOptions {
    DecodeConfig decode;
    bool use_beam = true;
    double snr_db = kInfSnr;
    int babble_speakers = 5;
    std::string split = "test";
    int limit = 0;  // 0 = whole split
    uint64_t seed = 0xE7A1;
};

struct EvalRecord {
    std::string task;
    int k_audio = 0;  // 0 = modality absent
    int k_video = 0;
    double snr_db = kInfSnr;
    double wer = 0.0;
    double tokens_mean = 0.0;  // modality tokens per utterance
    int64_t tokens_total = 0;
    int n_utterances = 0;
    int errors = 0;
    int ref_words = 0;
    uint64_t seed = 0;
};

template <typename T>
EvalRecord evaluate_model(const AvsrModelT<T>& model, const Corpus& corpus,
                          const EvalOptions& opts) {
    NoGradGuard ng;
    std::vector<size_t> idx = corpus.split_indices(opts.split);
    if (idx.empty()) throw ConfigError("evaluate: empty split '" + opts.split + "'");
    if (opts.limit > 0 && static_cast<size_t>(opts.limit) < idx.size()) {
        idx.resize(static_cast<size_t>(opts.limit));
    }

    EvalRecord rec;
    rec.task = task_name(model.spec.task);
    rec.k_audio = model.spec.uses_audio() ? model.spec.audio_projector.k : 0;
    rec.k_video = model.spec.uses_video() ? model.spec.video_projector.k : 0;
    rec.snr_db = opts.snr_db;
    rec.seed = opts.seed;

    int total_errors = 0, total_ref = 0;
    int64_t total_tokens = 0;
    for (size_t n = 0; n < idx.size(); ++n) {
        const size_t index = idx[n];
        const Utterance& utt = corpus.utterances[index];
        Rng rng = Rng(opts.seed).fork(index);

        std::optional<TensorT<T>> audio, video;
        if (model.spec.uses_audio()) {
            audio = detail::preprocess_audio<T>(corpus, idx, index, opts.snr_db,
                                                opts.babble_speakers, rng);
            total_tokens += token_count(audio->rows(), model.spec.audio_projector.k);
        }
        if (model.spec.uses_video()) {
            video = detail::preprocess_video<T>(utt);
            total_tokens += token_count(video->rows(), model.spec.video_projector.k);
        }

        UtteranceDecode<T> out =
            decode_utterance<T>(model, audio, video, opts.decode, opts.use_beam);
        const std::vector<std::string> hyp = model.tokenizer.decode_words(out.tokens);
        const EditCounts c = edit_counts(utt.words, hyp);
        total_errors += c.substitutions + c.deletions + c.insertions;
        total_ref += static_cast<int>(utt.words.size());
    }
    rec.n_utterances = static_cast<int>(idx.size());
    rec.errors = total_errors;
    rec.ref_words = total_ref;
    rec.wer = static_cast<double>(total_errors) / static_cast<double>(total_ref);
    rec.tokens_total = total_tokens;
    rec.tokens_mean = static_cast<double>(total_tokens) / static_cast<double>(idx.size());
    return rec;
}

// WER per SNR level for each supplied model (ASR row + AVSR rows, like the
// noise-robustness tables).
template <typename T>
std::vector<EvalRecord> noise_sweep(const std::vector<const AvsrModelT<T>*>& models,
                                    const Corpus& corpus, const std::vector<double>& levels,
                                    const EvalOptions& base) {
    if (models.empty() || levels.empty()) throw ConfigError("noise_sweep: empty grid");
    std::vector<EvalRecord> records;
    for (const auto* model : models) {
        for (double snr : levels) {
            EvalOptions opts = base;
            opts.snr_db = snr;
            records.push_back(evaluate_model(*model, corpus, opts));
        }
    }
    return records;
}

// Trains one model per compression rate and evaluates it; K drives the audio
// projector for ASR, the video projector for VSR, and both (video at half
// rate) for AVSR.
template <typename T>
std::vector<EvalRecord> compression_sweep(const ModelSpec& base, const Corpus& corpus,
                                          const TrainConfig& train_cfg,
                                          const std::vector<int>& k_values,
                                          const EvalOptions& eval_opts) {
    if (k_values.empty()) throw ConfigError("compression_sweep: empty K grid");
    std::vector<EvalRecord> records;
    for (int k : k_values) {
        if (k < 1) throw ConfigError("compression_sweep: K must be >= 1");
        ModelSpec spec = base;
        switch (spec.task) {
            case Task::kAsr: spec.audio_projector.k = k; break;
            case Task::kVsr: spec.video_projector.k = k; break;
            case Task::kAvsr:
                spec.audio_projector.k = k;
                spec.video_projector.k = std::max(1, k / 2);
                break;
        }
        auto model = build_model<T>(spec);
        train_model(*model, corpus, train_cfg);
        records.push_back(evaluate_model(*model, corpus, eval_opts));
    }
    return records;
}

inline std::string format_snr_label(double snr) {
    if (std::isinf(snr)) return "inf";
    std::ostringstream os;
    os << snr;
    return os.str();
}

// Rows "A V | wer per SNR" with "/" for an absent modality, WER in percent.
inline std::string format_noise_table(const std::vector<EvalRecord>& records,
                                      const std::vector<double>& levels) {
    std::ostringstream os;
    os << "  A   V  |";
    for (double s : levels) {
        os << " " << format_snr_label(s);
    }
    os << "\n";
    // group rows by (task, k_audio, k_video) in first-seen order
    std::vector<std::string> seen;
    for (const auto& r : records) {
        const std::string key = r.task + "/" + std::to_string(r.k_audio) + "/" +
                                std::to_string(r.k_video);
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
        seen.push_back(key);
        os << (r.k_audio > 0 ? "  " + std::to_string(r.k_audio) : "  /")
           << (r.k_video > 0 ? "   " + std::to_string(r.k_video) : "   /") << "  |";
        for (double s : levels) {
            for (const auto& rr : records) {
                const std::string kk = rr.task + "/" + std::to_string(rr.k_audio) + "/" +
                                       std::to_string(rr.k_video);
                if (kk == key && ((std::isinf(rr.snr_db) && std::isinf(s)) || rr.snr_db == s)) {
                    char buf[16];
                    std::snprintf(buf, sizeof(buf), " %.2f", 100.0 * rr.wer);
                    os << buf;
                }
            }
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace avsr
