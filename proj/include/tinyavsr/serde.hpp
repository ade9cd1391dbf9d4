#pragma once

// JSON (de)serialization for every config struct: run configs, checkpoint
// headers and metrics records all share these.

#include <string>

#include "json.hpp"
#include "tinyavsr/data.hpp"
#include "tinyavsr/decoding.hpp"
#include "tinyavsr/model.hpp"
#include "tinyavsr/train.hpp"

namespace avsr {

using nlohmann::json;

inline json snr_to_json(double snr) {
    if (std::isinf(snr)) return "inf";
    return snr;
}

inline double snr_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return kInfSnr;
        throw ConfigError("bad snr value '" + j.get<std::string>() + "'");
    }
    return j.get<double>();
}

// fills only keys present in j, leaving defaults elsewhere
template <typename V>
void maybe(const json& j, const char* key, V& out) {
    if (j.contains(key)) out = j.at(key).get<V>();
}

inline void to_json(json& j, const TransformerConfig& c) {
    j = json{{"n_layers", c.n_layers},     {"d_model", c.d_model},
             {"n_heads", c.n_heads},       {"ffn_mult", c.ffn_mult},
             {"vocab_size", c.vocab_size}, {"max_seq_len", c.max_seq_len},
             {"causal", c.causal},         {"init_std", c.init_std}};
}
inline void from_json(const json& j, TransformerConfig& c) {
    maybe(j, "n_layers", c.n_layers);
    maybe(j, "d_model", c.d_model);
    maybe(j, "n_heads", c.n_heads);
    maybe(j, "ffn_mult", c.ffn_mult);
    maybe(j, "vocab_size", c.vocab_size);
    maybe(j, "max_seq_len", c.max_seq_len);
    maybe(j, "causal", c.causal);
    maybe(j, "init_std", c.init_std);
}

inline void to_json(json& j, const EncoderConfig& c) {
    j = json{{"d_in", c.d_in},           {"n_layers", c.n_layers},
             {"d_model", c.d_model},     {"n_heads", c.n_heads},
             {"ffn_mult", c.ffn_mult},   {"max_seq_len", c.max_seq_len},
             {"frame_rate", c.frame_rate}};
}
inline void from_json(const json& j, EncoderConfig& c) {
    maybe(j, "d_in", c.d_in);
    maybe(j, "n_layers", c.n_layers);
    maybe(j, "d_model", c.d_model);
    maybe(j, "n_heads", c.n_heads);
    maybe(j, "ffn_mult", c.ffn_mult);
    maybe(j, "max_seq_len", c.max_seq_len);
    maybe(j, "frame_rate", c.frame_rate);
}

inline void to_json(json& j, const ProjectorConfig& c) {
    j = json{{"k", c.k}, {"d_enc", c.d_enc}, {"d_hidden", c.d_hidden}, {"d_model", c.d_model}};
}
inline void from_json(const json& j, ProjectorConfig& c) {
    maybe(j, "k", c.k);
    maybe(j, "d_enc", c.d_enc);
    maybe(j, "d_hidden", c.d_hidden);
    maybe(j, "d_model", c.d_model);
}

inline void to_json(json& j, const LoraConfig& c) {
    j = json{{"rank", c.rank}, {"alpha", c.alpha}, {"targets", c.targets}};
}
inline void from_json(const json& j, LoraConfig& c) {
    maybe(j, "rank", c.rank);
    maybe(j, "alpha", c.alpha);
    maybe(j, "targets", c.targets);
}

inline void to_json(json& j, const FuseOptions& c) {
    j = json{{"bos_before_prompt", c.bos_before_prompt},
             {"sep_between_modalities", c.sep_between_modalities}};
}
inline void from_json(const json& j, FuseOptions& c) {
    maybe(j, "bos_before_prompt", c.bos_before_prompt);
    maybe(j, "sep_between_modalities", c.sep_between_modalities);
}

inline void to_json(json& j, const ModelSpec& s) {
    j = json{{"task", task_name(s.task)},
             {"n_content_words", s.n_content_words},
             {"seed", s.seed},
             {"decoder", s.decoder},
             {"audio_encoder", s.audio_encoder},
             {"video_encoder", s.video_encoder},
             {"audio_projector", s.audio_projector},
             {"video_projector", s.video_projector},
             {"lora", s.lora},
             {"video_encoder_lora", s.video_encoder_lora},
             {"video_encoder_lora_cfg", s.video_encoder_lora_cfg},
             {"fuse", s.fuse}};
}
inline void from_json(const json& j, ModelSpec& s) {
    if (j.contains("task")) s.task = task_from_name(j.at("task").get<std::string>());
    maybe(j, "n_content_words", s.n_content_words);
    maybe(j, "seed", s.seed);
    maybe(j, "decoder", s.decoder);
    maybe(j, "audio_encoder", s.audio_encoder);
    maybe(j, "video_encoder", s.video_encoder);
    maybe(j, "audio_projector", s.audio_projector);
    maybe(j, "video_projector", s.video_projector);
    maybe(j, "lora", s.lora);
    maybe(j, "video_encoder_lora", s.video_encoder_lora);
    maybe(j, "video_encoder_lora_cfg", s.video_encoder_lora_cfg);
    maybe(j, "fuse", s.fuse);
}

inline void to_json(json& j, const ToyCorpusSpec& s) {
    j = json{{"vocab_size", s.vocab_size},
             {"n_utterances", s.n_utterances},
             {"min_words", s.min_words},
             {"max_words", s.max_words},
             {"frames_per_word_audio", s.frames_per_word_audio},
             {"frames_per_word_video", s.frames_per_word_video},
             {"d_audio", s.d_audio},
             {"d_video", s.d_video},
             {"emission_noise_std", s.emission_noise_std},
             {"train_frac", s.train_frac},
             {"valid_frac", s.valid_frac},
             {"seed", s.seed}};
}
inline void from_json(const json& j, ToyCorpusSpec& s) {
    maybe(j, "vocab_size", s.vocab_size);
    maybe(j, "n_utterances", s.n_utterances);
    maybe(j, "min_words", s.min_words);
    maybe(j, "max_words", s.max_words);
    maybe(j, "frames_per_word_audio", s.frames_per_word_audio);
    maybe(j, "frames_per_word_video", s.frames_per_word_video);
    maybe(j, "d_audio", s.d_audio);
    maybe(j, "d_video", s.d_video);
    maybe(j, "emission_noise_std", s.emission_noise_std);
    maybe(j, "train_frac", s.train_frac);
    maybe(j, "valid_frac", s.valid_frac);
    maybe(j, "seed", s.seed);
}

inline void to_json(json& j, const NoiseSpec& s) {
    json levels = json::array();
    for (double v : s.snr_levels_db) levels.push_back(snr_to_json(v));
    j = json{{"snr_levels_db", levels}, {"babble_speakers", s.babble_speakers}};
}
inline void from_json(const json& j, NoiseSpec& s) {
    if (j.contains("snr_levels_db")) {
        s.snr_levels_db.clear();
        for (const auto& v : j.at("snr_levels_db")) s.snr_levels_db.push_back(snr_from_json(v));
    }
    maybe(j, "babble_speakers", s.babble_speakers);
}

inline void to_json(json& j, const TrainConfig& c) {
    j = json{{"lr_peak", c.lr_peak},
             {"weight_decay", c.weight_decay},
             {"epochs", c.epochs},
             {"batch_size", c.batch_size},
             {"beta1", c.beta1},
             {"beta2", c.beta2},
             {"eps", c.eps},
             {"warmup_fraction", c.warmup_fraction},
             {"grad_clip_norm", c.grad_clip_norm},
             {"seed", c.seed},
             {"noise_enabled", c.noise_enabled},
             {"noise", c.noise},
             {"time_mask_rho", c.time_mask_rho}};
}
inline void from_json(const json& j, TrainConfig& c) {
    maybe(j, "lr_peak", c.lr_peak);
    maybe(j, "weight_decay", c.weight_decay);
    maybe(j, "epochs", c.epochs);
    maybe(j, "batch_size", c.batch_size);
    maybe(j, "beta1", c.beta1);
    maybe(j, "beta2", c.beta2);
    maybe(j, "eps", c.eps);
    maybe(j, "warmup_fraction", c.warmup_fraction);
    maybe(j, "grad_clip_norm", c.grad_clip_norm);
    maybe(j, "seed", c.seed);
    maybe(j, "noise_enabled", c.noise_enabled);
    maybe(j, "noise", c.noise);
    maybe(j, "time_mask_rho", c.time_mask_rho);
}

inline void to_json(json& j, const DecodeConfig& c) {
    j = json{{"beam_width", c.beam_width},
             {"temperature", c.temperature},
             {"max_new_tokens", c.max_new_tokens},
             {"length_normalization",
              c.length_normalization == LengthNorm::kByLength ? "by-length" : "none"}};
}
inline void from_json(const json& j, DecodeConfig& c) {
    maybe(j, "beam_width", c.beam_width);
    maybe(j, "temperature", c.temperature);
    maybe(j, "max_new_tokens", c.max_new_tokens);
    if (j.contains("length_normalization")) {
        const std::string v = j.at("length_normalization").get<std::string>();
        if (v == "none") c.length_normalization = LengthNorm::kNone;
        else if (v == "by-length") c.length_normalization = LengthNorm::kByLength;
        else throw ConfigError("bad length_normalization '" + v + "'");
    }
}

inline void to_json(json& j, const EvalRecord& r) {
    j = json{{"task", r.task},
             {"k_audio", r.k_audio},
             {"k_video", r.k_video},
             {"snr_db", snr_to_json(r.snr_db)},
             {"wer", r.wer},
             {"tokens_mean", r.tokens_mean},
             {"tokens_total", r.tokens_total},
             {"n_utterances", r.n_utterances},
             {"errors", r.errors},
             {"ref_words", r.ref_words},
             {"seed", r.seed}};
}
inline void from_json(const json& j, EvalRecord& r) {
    maybe(j, "task", r.task);
    maybe(j, "k_audio", r.k_audio);
    maybe(j, "k_video", r.k_video);
    if (j.contains("snr_db")) r.snr_db = snr_from_json(j.at("snr_db"));
    maybe(j, "wer", r.wer);
    maybe(j, "tokens_mean", r.tokens_mean);
    maybe(j, "tokens_total", r.tokens_total);
    maybe(j, "n_utterances", r.n_utterances);
    maybe(j, "errors", r.errors);
    maybe(j, "ref_words", r.ref_words);
    maybe(j, "seed", r.seed);
}

}  // namespace avsr
