#pragma once

// Builds the decoder input: modality tokens, prompt tokens and (in training)
// the target transcription, concatenated into one causal sequence with a loss
// mask over the response span.

#include <optional>
#include <vector>

#include "tinyavsr/common.hpp"
#include "tinyavsr/tensor.hpp"
#include "tinyavsr/tokenizer.hpp"

namespace avsr {

struct Span {
    int begin = 0;
    int end = 0;  // half-open

    int size() const { return end - begin; }
};

struct SpanSet {
    Span audio, video, prompt, response;
};

enum class FuseMode { kTrain, kInfer };

template <typename T>
struct FusedSequenceT {
    Task task = Task::kAsr;
    TensorT<T> embeddings;        // [T_total x d_model]
    SpanSet spans;                // ordered audio < video < prompt < response, tiling [0, T)
    std::vector<bool> loss_mask;  // true exactly on response positions
    std::vector<int> target_ids;  // response token ids incl. the closing EOS (train mode)
    std::vector<int> prompt_ids;

    int total() const { return static_cast<int>(loss_mask.size()); }
};

struct FuseOptions {
    bool bos_before_prompt = false;
    bool sep_between_modalities = false;
};

// Concatenate [audio][video][prompt][response]. In train mode the response is
// target + EOS and the loss mask covers exactly that span; in infer mode the
// response span is empty and generation appends to it.
template <typename T>
FusedSequenceT<T> fuse(const std::optional<TensorT<T>>& audio_tokens,
                       const std::optional<TensorT<T>>& video_tokens,
                       const PromptTemplate& prompt, const std::vector<int>& target_ids,
                       FuseMode mode, const TensorT<T>& token_embedding,
                       const FuseOptions& opts = {}) {
    const bool want_audio = prompt.task != Task::kVsr;
    const bool want_video = prompt.task != Task::kAsr;
    auto present = [](const std::optional<TensorT<T>>& t) {
        return t.has_value() && t->numel() > 0;
    };
    if (want_audio != present(audio_tokens)) {
        throw ConfigError(std::string("fuse: task ") + task_name(prompt.task) +
                          (want_audio ? " requires audio tokens" : " forbids audio tokens"));
    }
    if (want_video != present(video_tokens)) {
        throw ConfigError(std::string("fuse: task ") + task_name(prompt.task) +
                          (want_video ? " requires video tokens" : " forbids video tokens"));
    }
    if (prompt.ids.empty()) throw ConfigError("fuse: empty prompt");

    const int d = token_embedding.cols();
    std::vector<TensorT<T>> parts;
    FusedSequenceT<T> fused;
    fused.task = prompt.task;
    fused.prompt_ids = prompt.ids;

    int cursor = 0;
    auto mark = [&cursor](Span& span, int len) {
        span.begin = cursor;
        span.end = cursor + len;
        cursor += len;
    };

    if (present(audio_tokens)) {
        if (audio_tokens->cols() != d) throw ConfigError("fuse: audio token width mismatch");
        parts.push_back(*audio_tokens);
        mark(fused.spans.audio, audio_tokens->rows());
    } else {
        mark(fused.spans.audio, 0);
    }
    if (opts.sep_between_modalities && present(audio_tokens) && present(video_tokens)) {
        // separator folds into the video span for accounting
        parts.push_back(embedding(token_embedding, std::vector<int>{Tokenizer::kSep}));
        if (video_tokens->cols() != d) throw ConfigError("fuse: video token width mismatch");
        parts.push_back(*video_tokens);
        mark(fused.spans.video, video_tokens->rows() + 1);
    } else if (present(video_tokens)) {
        if (video_tokens->cols() != d) throw ConfigError("fuse: video token width mismatch");
        parts.push_back(*video_tokens);
        mark(fused.spans.video, video_tokens->rows());
    } else {
        mark(fused.spans.video, 0);
    }

    std::vector<int> prompt_ids = prompt.ids;
    if (opts.bos_before_prompt) prompt_ids.insert(prompt_ids.begin(), Tokenizer::kBos);
    parts.push_back(embedding(token_embedding, prompt_ids));
    mark(fused.spans.prompt, static_cast<int>(prompt_ids.size()));

    if (mode == FuseMode::kTrain) {
        if (target_ids.empty()) throw ConfigError("fuse: train mode requires target tokens");
        fused.target_ids = target_ids;
        fused.target_ids.push_back(Tokenizer::kEos);
        parts.push_back(embedding(token_embedding, fused.target_ids));
        mark(fused.spans.response, static_cast<int>(fused.target_ids.size()));
    } else {
        mark(fused.spans.response, 0);
    }

    fused.embeddings = concat_rows(parts);
    fused.loss_mask.assign(static_cast<size_t>(cursor), false);
    for (int i = fused.spans.response.begin; i < fused.spans.response.end; ++i) {
        fused.loss_mask[static_cast<size_t>(i)] = true;
    }
    return fused;
}

// Mean over response tokens of -log p(y_i | ...), from shifted logits: the
// prediction for the token at position i comes from the logits at i-1.
template <typename T>
TensorT<T> response_loss(const FusedSequenceT<T>& fused, const TensorT<T>& logits) {
    const int total = fused.total();
    if (logits.rows() != total) {
        throw ShapeError("response_loss: logits rows " + std::to_string(logits.rows()) +
                         " do not match fused length " + std::to_string(total));
    }
    if (fused.spans.response.size() == 0) {
        throw DegenerateInputError("response_loss: empty response span");
    }
    if (fused.spans.response.begin < 1) {
        throw ContractError("response_loss: response span must follow a prompt");
    }
    std::vector<int> shifted_targets(static_cast<size_t>(total - 1), 0);
    std::vector<bool> shifted_mask(static_cast<size_t>(total - 1), false);
    const Span r = fused.spans.response;
    for (int i = r.begin; i < r.end; ++i) {
        shifted_targets[static_cast<size_t>(i - 1)] = fused.target_ids[i - r.begin];
        shifted_mask[static_cast<size_t>(i - 1)] = true;
    }
    return masked_cross_entropy(slice_rows(logits, 0, total - 1), shifted_targets,
                                shifted_mask);
}

// Teacher-forced sequence log-probability: sum over response tokens of
// log p(y_i | modality tokens, prompt, y_<i).
template <typename T>
TensorT<T> sequence_log_prob(const FusedSequenceT<T>& fused, const TensorT<T>& logits) {
    const int n = fused.spans.response.size();
    if (n == 0) throw DegenerateInputError("sequence_log_prob: empty response span");
    return scale(response_loss(fused, logits), -static_cast<T>(n));
}

}  // namespace avsr
