#include <cmath>

#include "doctest.h"
#include "tinyavsr/assembly.hpp"
#include "tinyavsr/model.hpp"

using namespace avsr;

namespace {

ModelSpec tiny_spec(Task task) {
    ModelSpec spec = default_model_spec(task);
    spec.decoder.n_layers = 2;
    spec.decoder.d_model = 32;
    spec.decoder.n_heads = 2;
    spec.decoder.max_seq_len = 128;
    spec.audio_encoder.d_in = 6;
    spec.audio_encoder.d_model = 16;
    spec.audio_encoder.n_heads = 2;
    spec.video_encoder.d_in = 5;
    spec.video_encoder.d_model = 16;
    spec.video_encoder.n_heads = 2;
    spec.lora.rank = 4;
    return spec;
}

}  // namespace

TEST_CASE("prompt templates are exact") {
    Tokenizer tok(32);
    CHECK(build_prompt(Task::kAsr, tok).text == "Transcribe speech to text.");
    CHECK(build_prompt(Task::kVsr, tok).text == "Transcribe video to text.");
    CHECK(build_prompt(Task::kAvsr, tok).text == "Transcribe speech and video to text.");
    CHECK(build_prompt(Task::kAsr, tok).ids.size() == 4);
    CHECK(build_prompt(Task::kAvsr, tok).ids.size() == 6);
}

TEST_CASE("tokenizer round trip and unknown words") {
    Tokenizer tok(32);
    CHECK(tok.vocab_size() == 42);
    auto ids = tok.encode("w00 w31 w05");
    CHECK(tok.decode(ids) == "w00 w31 w05");
    CHECK_THROWS_AS(tok.encode("nonexistent"), ConfigError);
    CHECK_THROWS_AS(tok.word_of(100), ParamError);
    CHECK(tok.word_of(Tokenizer::kEos) == "<eos>");
    // specials skipped on decode
    CHECK(tok.decode({Tokenizer::kBos, tok.id_of("w03"), Tokenizer::kEos}) == "w03");
}

TEST_CASE("span arithmetic in train mode") {
    Tokenizer tok(32);
    Rng rng(41);
    Tensor64 table = Tensor64::randn({tok.vocab_size(), 8}, rng);
    Tensor64 audio = Tensor64::randn({10, 8}, rng);
    PromptTemplate prompt = build_prompt(Task::kAsr, tok);
    // pad the prompt to six ids to mirror the documented arithmetic
    prompt.ids = tok.encode("Transcribe speech and video to text.");
    std::vector<int> target = tok.encode("w01 w02 w03 w04");  // +EOS -> 5 response tokens

    auto fused = fuse<double>(audio, std::nullopt, prompt, target, FuseMode::kTrain, table);
    CHECK(fused.total() == 21);  // 10 + 6 + 5
    int mask_sum = 0;
    for (bool b : fused.loss_mask) mask_sum += b ? 1 : 0;
    CHECK(mask_sum == 5);
    CHECK(fused.spans.response.size() == 5);
    CHECK(static_cast<int>(fused.target_ids.size()) == fused.spans.response.size());
    CHECK(fused.target_ids.back() == Tokenizer::kEos);
}

TEST_CASE("spans tile the sequence with no gaps or overlaps") {
    Tokenizer tok(8);
    Rng rng(42);
    Tensor64 table = Tensor64::randn({tok.vocab_size(), 8}, rng);
    for (int trial = 0; trial < 30; ++trial) {
        Task task = static_cast<Task>(trial % 3);
        const int na = rng.uniform_int(1, 12), nv = rng.uniform_int(1, 12);
        std::optional<Tensor64> audio, video;
        if (task != Task::kVsr) audio = Tensor64::randn({na, 8}, rng);
        if (task != Task::kAsr) video = Tensor64::randn({nv, 8}, rng);
        std::vector<int> target;
        for (int i = 0, n = rng.uniform_int(1, 6); i < n; ++i)
            target.push_back(tok.first_content_id() + rng.uniform_int(0, 7));
        const FuseMode mode = trial % 2 == 0 ? FuseMode::kTrain : FuseMode::kInfer;
        auto fused = fuse<double>(audio, video, build_prompt(task, tok), target, mode, table);

        const SpanSet& s = fused.spans;
        CHECK(s.audio.begin == 0);
        CHECK(s.audio.end == s.video.begin);
        CHECK(s.video.end == s.prompt.begin);
        CHECK(s.prompt.end == s.response.begin);
        CHECK(s.response.end == fused.total());
        CHECK(fused.embeddings.rows() == fused.total());
        for (int i = 0; i < fused.total(); ++i) {
            const bool in_response = i >= s.response.begin && i < s.response.end;
            CHECK(fused.loss_mask[static_cast<size_t>(i)] == in_response);
        }
        if (mode == FuseMode::kInfer) CHECK(s.response.size() == 0);
    }
}

TEST_CASE("task/modality mismatches are rejected") {
    Tokenizer tok(8);
    Rng rng(43);
    Tensor64 table = Tensor64::randn({tok.vocab_size(), 8}, rng);
    Tensor64 audio = Tensor64::randn({4, 8}, rng);
    Tensor64 video = Tensor64::randn({3, 8}, rng);
    Tensor64 empty_video = Tensor64::zeros({0, 8});
    std::vector<int> target = {tok.first_content_id()};

    CHECK_THROWS_AS(fuse<double>(audio, video, build_prompt(Task::kAsr, tok), target,
                                 FuseMode::kTrain, table),
                    ConfigError);
    CHECK_THROWS_AS(fuse<double>(std::nullopt, std::nullopt, build_prompt(Task::kAsr, tok),
                                 target, FuseMode::kTrain, table),
                    ConfigError);
    CHECK_THROWS_AS(fuse<double>(audio, empty_video, build_prompt(Task::kAvsr, tok), target,
                                 FuseMode::kTrain, table),
                    ConfigError);
    CHECK_THROWS_AS(fuse<double>(audio, std::nullopt, build_prompt(Task::kVsr, tok), target,
                                 FuseMode::kTrain, table),
                    ConfigError);
}

TEST_CASE("sequence log-prob limit case and CE identity") {
    // hand-built fused sequence: one prompt position, one response token
    FusedSequenceT<double> fused;
    fused.task = Task::kAsr;
    fused.spans.prompt = {0, 1};
    fused.spans.response = {1, 2};
    fused.loss_mask = {false, true};
    fused.target_ids = {7};
    fused.embeddings = Tensor64::zeros({2, 4});

    Tensor64 logits = Tensor64::zeros({2, 12});
    logits.at(0, 7) = 60.0;  // probability ~1 for the response token
    CHECK(std::fabs(sequence_log_prob(fused, logits).item()) < 1e-8);

    SUBCASE("equals -N times the masked cross entropy") {
        Rng rng(44);
        Tensor64 rnd = Tensor64::randn({2, 12}, rng);
        const double lp = sequence_log_prob(fused, rnd).item();
        const double ce = response_loss(fused, rnd).item();
        CHECK(lp == doctest::Approx(-1.0 * ce).epsilon(1e-12));
    }
}

TEST_CASE("empty response span is rejected for scoring") {
    FusedSequenceT<double> fused;
    fused.spans.prompt = {0, 2};
    fused.spans.response = {2, 2};
    fused.loss_mask = {false, false};
    fused.embeddings = Tensor64::zeros({2, 4});
    Tensor64 logits = Tensor64::zeros({2, 5});
    CHECK_THROWS_AS(sequence_log_prob(fused, logits), DegenerateInputError);
    CHECK_THROWS_AS(response_loss(fused, logits), DegenerateInputError);
}

TEST_CASE("audio content reaches response-position logits") {
    auto model = build_model<double>(tiny_spec(Task::kAsr));
    Rng rng(45);
    Tensor64 audio1 = Tensor64::randn({8, 6}, rng);
    Tensor64 audio2 = audio1.detached();
    audio2.at(2, 3) += 2.0;
    std::vector<int> target = {model->tokenizer.first_content_id()};

    auto f1 = assemble(*model, std::optional<Tensor64>(audio1), std::nullopt, target,
                       FuseMode::kTrain);
    auto f2 = assemble(*model, std::optional<Tensor64>(audio2), std::nullopt, target,
                       FuseMode::kTrain);
    Tensor64 l1 = forward_logits(*model, f1);
    Tensor64 l2 = forward_logits(*model, f2);
    // logits feeding the first response prediction live at the last prompt row
    const int row = f1.spans.prompt.end - 1;
    bool changed = false;
    for (int j = 0; j < l1.cols(); ++j)
        if (l1.at(row, j) != l2.at(row, j)) changed = true;
    CHECK(changed);
}

TEST_CASE("separator and BOS options") {
    Tokenizer tok(8);
    Rng rng(46);
    Tensor64 table = Tensor64::randn({tok.vocab_size(), 8}, rng);
    Tensor64 audio = Tensor64::randn({4, 8}, rng);
    Tensor64 video = Tensor64::randn({3, 8}, rng);
    std::vector<int> target = {tok.first_content_id()};
    FuseOptions opts;
    opts.sep_between_modalities = true;
    opts.bos_before_prompt = true;
    auto fused = fuse<double>(audio, video, build_prompt(Task::kAvsr, tok), target,
                              FuseMode::kTrain, table, opts);
    CHECK(fused.spans.video.size() == 4);   // 3 video tokens + separator
    CHECK(fused.spans.prompt.size() == 7);  // BOS + 6 prompt words
    CHECK(fused.total() == 4 + 4 + 7 + 2);
}
