#pragma once

// The full system: frozen modality encoders feeding compression projectors
// whose tokens join prompt/response text tokens in a LoRA-adapted causal
// decoder. Owns the parameter store and the trainable/frozen partition.

#include <memory>
#include <type_traits>
#include <optional>
#include <string>
#include <vector>

#include "tinyavsr/assembly.hpp"
#include "tinyavsr/common.hpp"
#include "tinyavsr/lora.hpp"
#include "tinyavsr/nn.hpp"
#include "tinyavsr/param_store.hpp"
#include "tinyavsr/projector.hpp"
#include "tinyavsr/tokenizer.hpp"

namespace avsr {

// Everything needed to rebuild a model deterministically.
struct ModelSpec {
    Task task = Task::kAsr;
    int n_content_words = 32;
    uint64_t seed = 1;
    TransformerConfig decoder;       // vocab_size filled from the tokenizer
    EncoderConfig audio_encoder;     // frame_rate 50
    EncoderConfig video_encoder;     // frame_rate 25
    ProjectorConfig audio_projector; // d_enc/d_model derived
    ProjectorConfig video_projector;
    LoraConfig lora;                 // decoder adapters
    bool video_encoder_lora = false; // VSR option
    LoraConfig video_encoder_lora_cfg;
    FuseOptions fuse;

    bool uses_audio() const { return task != Task::kVsr; }
    bool uses_video() const { return task != Task::kAsr; }
};

inline ModelSpec default_model_spec(Task task) {
    ModelSpec s;
    s.task = task;
    s.decoder.n_layers = 4;
    s.decoder.d_model = 128;
    s.decoder.n_heads = 4;
    s.decoder.ffn_mult = 4;
    s.decoder.max_seq_len = 256;
    s.audio_encoder.d_in = 32;
    s.audio_encoder.d_model = 64;
    s.audio_encoder.frame_rate = 50.0;
    s.video_encoder.d_in = 24;
    s.video_encoder.d_model = 64;
    s.video_encoder.frame_rate = 25.0;
    // compression presets per task: ASR/VSR at K=2, audio-visual at 4/2
    s.audio_projector.k = task == Task::kAvsr ? 4 : 2;
    s.video_projector.k = task == Task::kAvsr ? 2 : (task == Task::kVsr ? 2 : 1);
    s.lora.rank = 64;
    s.video_encoder_lora_cfg.rank = 16;
    return s;
}

template <typename T>
struct AvsrModelT {
    ModelSpec spec;
    Tokenizer tokenizer{32};
    ParamStoreT<T> params;

    TransformerT<T> decoder;
    ModelAdaptersT<T> decoder_adapters;
    EncoderT<T> audio_encoder;
    EncoderT<T> video_encoder;
    ProjectorT<T> audio_projector;
    ProjectorT<T> video_projector;
    PromptTemplate prompt;

    AvsrModelT(const AvsrModelT&) = delete;
    AvsrModelT& operator=(const AvsrModelT&) = delete;
    AvsrModelT(AvsrModelT&&) = default;
    AvsrModelT& operator=(AvsrModelT&&) = default;
    AvsrModelT() = default;

    // Analytic count of what should train: projectors plus LoRA adapters.
    int64_t expected_trainable_params() const {
        int64_t n = 0;
        if (spec.uses_audio()) n += audio_projector.cfg.param_count();
        if (spec.uses_video()) n += video_projector.cfg.param_count();
        n += count_lora_params(spec.lora.rank, lora_target_shapes(decoder, spec.lora));
        if (spec.video_encoder_lora) {
            n += count_lora_params(spec.video_encoder_lora_cfg.rank,
                                   lora_target_shapes(video_encoder.stack,
                                                      spec.video_encoder_lora_cfg));
        }
        return n;
    }
};

template <typename T>
std::unique_ptr<AvsrModelT<T>> build_model(const ModelSpec& spec_in) {
    auto model = std::make_unique<AvsrModelT<T>>();
    model->spec = spec_in;
    ModelSpec& spec = model->spec;

    model->tokenizer = Tokenizer(spec.n_content_words);
    spec.decoder.vocab_size = model->tokenizer.vocab_size();
    spec.decoder.causal = true;
    spec.audio_projector.d_enc = spec.audio_encoder.d_model;
    spec.audio_projector.d_model = spec.decoder.d_model;
    spec.video_projector.d_enc = spec.video_encoder.d_model;
    spec.video_projector.d_model = spec.decoder.d_model;

    Rng rng(spec.seed);
    Rng dec_rng = rng.fork(1), aenc_rng = rng.fork(2), venc_rng = rng.fork(3);
    Rng aproj_rng = rng.fork(4), vproj_rng = rng.fork(5), lora_rng = rng.fork(6);

    model->decoder = make_decoder<T>(spec.decoder, dec_rng);
    register_transformer_params(model->params, "llm", model->decoder);
    model->decoder_adapters =
        attach_lora(model->params, "llm", model->decoder, spec.lora, lora_rng);

    if (spec.uses_audio()) {
        model->audio_encoder = make_encoder<T>(spec.audio_encoder, aenc_rng);
        register_encoder_params(model->params, "enc.audio", model->audio_encoder);
        model->audio_projector = make_projector<T>(spec.audio_projector, aproj_rng);
        register_projector_params(model->params, "projector.audio", model->audio_projector);
    }
    if (spec.uses_video()) {
        model->video_encoder = make_encoder<T>(spec.video_encoder, venc_rng);
        register_encoder_params(model->params, "enc.video", model->video_encoder);
        model->video_projector = make_projector<T>(spec.video_projector, vproj_rng);
        register_projector_params(model->params, "projector.video", model->video_projector);
        if (spec.video_encoder_lora) {
            Rng enc_lora_rng = rng.fork(7);
            model->video_encoder.adapters =
                attach_lora(model->params, "enc.video", model->video_encoder.stack,
                            spec.video_encoder_lora_cfg, enc_lora_rng);
            model->video_encoder.has_adapters = true;
        }
    }
    model->prompt = build_prompt(spec.task, model->tokenizer);
    return model;
}

// Encoder -> stacking -> projector for one modality. The incoming features
// must already be pre-processed (normalization, noise, masking).
template <typename T>
TensorT<T> modality_tokens(const AvsrModelT<T>& m, Modality mod, const TensorT<T>& features) {
    const EncoderT<T>& enc = mod == Modality::kAudio ? m.audio_encoder : m.video_encoder;
    const ProjectorT<T>& proj = mod == Modality::kAudio ? m.audio_projector : m.video_projector;
    EncoderOutputT<T> out = frozen_encoder_forward(enc, features);
    return projector_forward(proj, out.features);
}

// Full fused sequence for one utterance.
template <typename T>
FusedSequenceT<T> assemble(const AvsrModelT<T>& m,
                           const std::optional<std::type_identity_t<TensorT<T>>>& audio,
                           const std::optional<std::type_identity_t<TensorT<T>>>& video,
                           const std::vector<int>& target_ids, FuseMode mode) {
    std::optional<TensorT<T>> audio_tok, video_tok;
    if (m.spec.uses_audio()) {
        if (!audio.has_value() || audio->numel() == 0) {
            throw ConfigError(std::string("assemble: task ") + task_name(m.spec.task) +
                              " requires audio features");
        }
        audio_tok = modality_tokens(m, Modality::kAudio, *audio);
    } else if (audio.has_value()) {
        throw ConfigError("assemble: audio features supplied for a video-only task");
    }
    if (m.spec.uses_video()) {
        if (!video.has_value() || video->numel() == 0) {
            throw ConfigError(std::string("assemble: task ") + task_name(m.spec.task) +
                              " requires video features");
        }
        video_tok = modality_tokens(m, Modality::kVideo, *video);
    } else if (video.has_value()) {
        throw ConfigError("assemble: video features supplied for an audio-only task");
    }
    return fuse(audio_tok, video_tok, m.prompt, target_ids, mode,
                m.decoder.token_embedding, m.spec.fuse);
}

template <typename T>
TensorT<T> forward_logits(const AvsrModelT<T>& m, const FusedSequenceT<T>& fused,
                          AttnTraceT<T>* trace = nullptr) {
    return decoder_logits(m.decoder, &m.decoder_adapters, fused.embeddings, 0, nullptr,
                          trace);
}

}  // namespace avsr
