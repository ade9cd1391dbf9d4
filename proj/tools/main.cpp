// tinyavsr command line: corpus generation, training, evaluation, sweeps and
// single-utterance decoding over the synthetic audio-visual recognition lab.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tinyavsr/checkpoint.hpp"
#include "tinyavsr/run_config.hpp"
#include "tinyavsr/serde.hpp"
#include "tinyavsr/svg_plot.hpp"
#include "tinyavsr/train.hpp"

namespace fs = std::filesystem;
using namespace avsr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

double parse_snr(const std::string& s) {
    if (s == "inf" || s == "Inf" || s == "INF") return kInfSnr;
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw ConfigError("bad SNR value '" + s + "' (number or 'inf')");
    }
}

std::vector<double> parse_snr_grid(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(parse_snr(item));
    }
    return out;
}

std::vector<int> parse_int_grid(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

void ensure_out_dir(std::string& out, const std::string& leaf) {
    if (out.empty()) out = (fs::path(default_out_root()) / leaf).string();
    fs::create_directories(out);
}

void append_records(const std::string& path, const std::vector<EvalRecord>& records) {
    std::ofstream os(path, std::ios::app);
    if (!os) throw ConfigError("cannot write '" + path + "'");
    for (const auto& r : records) os << json(r).dump() << "\n";
}

struct CommonTrainFlags {
    std::string config_path, corpus_dir, out_dir, task = "", precision = "";
    uint64_t seed = 0;
    int epochs = -1, batch_size = -1, lora_rank = -1, k_audio = -1, k_video = -1;
    double lr = -1, time_mask_rho = -1;
    int noise = -1;  // tri-state: unset/-1, off/0, on/1
    bool video_encoder_lora = false;
};

// file values first, then explicit flags on top
RunConfig resolve_config(const CommonTrainFlags& f) {
    RunConfig cfg;
    if (!f.config_path.empty()) cfg = load_run_config(f.config_path);
    if (!f.task.empty()) {
        cfg.task = task_from_name(f.task);
        cfg.model = default_model_spec(cfg.task);
    }
    if (f.seed != 0) cfg.seed = f.seed;
    if (!f.precision.empty()) cfg.precision = f.precision;
    if (!f.corpus_dir.empty()) cfg.corpus_dir = f.corpus_dir;
    if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
    if (f.epochs >= 0) cfg.train.epochs = f.epochs;
    if (f.batch_size >= 0) cfg.train.batch_size = f.batch_size;
    if (f.lr >= 0) cfg.train.lr_peak = f.lr;
    if (f.time_mask_rho >= 0) cfg.train.time_mask_rho = f.time_mask_rho;
    if (f.noise >= 0) cfg.train.noise_enabled = f.noise == 1;
    if (f.lora_rank >= 0) cfg.model.lora.rank = f.lora_rank;
    if (f.k_audio >= 0) cfg.model.audio_projector.k = f.k_audio;
    if (f.k_video >= 0) cfg.model.video_projector.k = f.k_video;
    if (f.video_encoder_lora) cfg.model.video_encoder_lora = true;
    cfg.normalize();
    return cfg;
}

// corpus feature widths drive the encoder input widths
void sync_model_to_corpus(RunConfig& cfg, const Corpus& corpus) {
    cfg.corpus = corpus.spec;
    cfg.normalize();
}

template <typename T>
void print_run_header(const AvsrModelT<T>& model, const RunConfig& cfg, const Corpus& corpus) {
    const auto& spec = model.spec;
    std::printf("task: %s   precision: %s   seed: %llu\n", task_name(spec.task),
                cfg.precision.c_str(), static_cast<unsigned long long>(cfg.seed));
    std::printf("lr: %g (peak)   weight decay: %g   epochs: %d   batch: %d\n",
                cfg.train.resolved_lr(spec.task), cfg.train.weight_decay, cfg.train.epochs,
                cfg.train.batch_size);
    std::printf("noise injection: %s   time-mask rho: %g\n",
                cfg.train.noise_enabled ? "on" : "off", cfg.train.time_mask_rho);

    int64_t proj_params = 0;
    std::string proj_terms;
    if (spec.uses_audio()) {
        proj_params += spec.audio_projector.param_count();
        proj_terms += " audio-projector " + std::to_string(spec.audio_projector.param_count());
    }
    if (spec.uses_video()) {
        proj_params += spec.video_projector.param_count();
        proj_terms += " video-projector " + std::to_string(spec.video_projector.param_count());
    }
    const int64_t lora_params =
        count_lora_params(spec.lora.rank, lora_target_shapes(model.decoder, spec.lora));
    int64_t enc_lora = 0;
    if (spec.video_encoder_lora) {
        enc_lora = count_lora_params(spec.video_encoder_lora_cfg.rank,
                                     lora_target_shapes(model.video_encoder.stack,
                                                        spec.video_encoder_lora_cfg));
    }
    std::printf("trainable params: %lld =%s + llm-lora %lld%s  (store: %lld)\n",
                static_cast<long long>(model.expected_trainable_params()), proj_terms.c_str(),
                static_cast<long long>(lora_params),
                spec.video_encoder_lora
                    ? (" + video-encoder-lora " + std::to_string(enc_lora)).c_str()
                    : "",
                static_cast<long long>(model.params.trainable_params()));

    // token-budget estimate over the train split
    const auto train_idx = corpus.split_indices("train");
    int64_t tok_a = 0, tok_v = 0;
    for (size_t i : train_idx) {
        if (spec.uses_audio())
            tok_a += token_count(corpus.utterances[i].audio.rows(), spec.audio_projector.k);
        if (spec.uses_video())
            tok_v += token_count(corpus.utterances[i].video.rows(), spec.video_projector.k);
    }
    const double n = static_cast<double>(std::max<size_t>(1, train_idx.size()));
    std::printf("token budget (mean/utt): audio %.1f (K=%d)  video %.1f (K=%d)\n",
                tok_a / n, spec.uses_audio() ? spec.audio_projector.k : 0, tok_v / n,
                spec.uses_video() ? spec.video_projector.k : 0);
}

json audit_to_json(const FreezeAudit& a) {
    return json{{"trainable_params", a.trainable_params},
                {"expected_trainable_params", a.expected_trainable_params},
                {"total_params", a.total_params},
                {"frozen_fingerprint_before", a.frozen_fingerprint_before},
                {"frozen_fingerprint_after", a.frozen_fingerprint_after},
                {"frozen_bytes_identical", a.frozen_bytes_identical},
                {"trainable_names", a.trainable_names}};
}

template <typename T>
int run_train(RunConfig cfg, bool dry_run) {
    cfg.validate();
    if (cfg.corpus_dir.empty()) throw ConfigError("train: --corpus is required");
    Corpus corpus = load_corpus(cfg.corpus_dir);
    sync_model_to_corpus(cfg, corpus);

    auto model = build_model<T>(cfg.model);
    print_run_header(*model, cfg, corpus);
    if (dry_run) {
        std::printf("dry run: config OK, no training performed\n");
        return kExitOk;
    }

    ensure_out_dir(cfg.out_dir, std::string("train-") + task_name(cfg.task));
    save_run_config(cfg, (fs::path(cfg.out_dir) / "config.json").string());

    TrainResult result = train_model(*model, corpus, cfg.train);

    {
        std::ofstream metrics(fs::path(cfg.out_dir) / "metrics.jsonl");
        for (const auto& em : result.epochs) {
            metrics << json{{"epoch", em.epoch},
                            {"loss", em.mean_loss},
                            {"lr", em.final_lr},
                            {"wall_s", em.wall_s}}
                           .dump()
                    << "\n";
            std::printf("epoch %d: loss %.4f  lr %.2e  (%.1fs)\n", em.epoch, em.mean_loss,
                        em.final_lr, em.wall_s);
        }
    }
    write_text_file((fs::path(cfg.out_dir) / "freeze_audit.json").string(),
                    audit_to_json(result.audit).dump(2) + "\n");
    save_checkpoint(*model, (fs::path(cfg.out_dir) / "checkpoint.bin").string());
    std::printf("frozen weights intact: %s\n",
                result.audit.frozen_bytes_identical ? "yes" : "NO");
    std::printf("checkpoint: %s\n", (fs::path(cfg.out_dir) / "checkpoint.bin").c_str());
    return kExitOk;
}

template <typename T>
int run_evaluate(const std::string& ckpt_path, const std::string& corpus_dir,
                 std::string out_dir, const EvalOptions& opts) {
    auto model = load_checkpoint<T>(ckpt_path);
    Corpus corpus = load_corpus(corpus_dir);
    std::printf("decoding: %s, beam width %d, temperature %g\n",
                opts.use_beam ? "beam search" : "greedy", opts.decode.beam_width,
                opts.decode.temperature);
    EvalRecord rec = evaluate_model(*model, corpus, opts);
    std::printf("task %s  K_a %d  K_v %d  snr %s: WER %.2f%%  (%d/%d errors, %d utts, "
                "%.1f modality tokens/utt)\n",
                rec.task.c_str(), rec.k_audio, rec.k_video,
                format_snr_label(rec.snr_db).c_str(), 100.0 * rec.wer, rec.errors,
                rec.ref_words, rec.n_utterances, rec.tokens_mean);
    if (!out_dir.empty()) {
        ensure_out_dir(out_dir, "evaluate");
        append_records((fs::path(out_dir) / "metrics.jsonl").string(), {rec});
    }
    return kExitOk;
}

template <typename T>
int run_sweep(RunConfig cfg, const std::vector<int>& k_grid, const std::vector<double>& snr_grid,
              const std::vector<std::string>& k_tasks, int eval_limit, int snr_k_audio,
              int snr_k_video) {
    if (k_grid.empty() && snr_grid.empty()) {
        throw ConfigError("sweep: provide --k-grid and/or --snr-grid");
    }
    if (cfg.corpus_dir.empty()) throw ConfigError("sweep: --corpus is required");
    Corpus corpus = load_corpus(cfg.corpus_dir);
    sync_model_to_corpus(cfg, corpus);
    ensure_out_dir(cfg.out_dir, "sweep");
    save_run_config(cfg, (fs::path(cfg.out_dir) / "config.json").string());
    const std::string metrics_path = (fs::path(cfg.out_dir) / "metrics.jsonl").string();

    EvalOptions eval_opts;
    eval_opts.decode = cfg.decode;
    eval_opts.limit = eval_limit;

    if (!k_grid.empty()) {
        std::vector<PlotSeries> series;
        for (const auto& task_s : k_tasks) {
            ModelSpec spec = cfg.model;
            spec.task = task_from_name(task_s);
            spec.seed = cfg.seed;
            TrainConfig tc = cfg.train;
            tc.noise_enabled = false;
            std::printf("compression sweep: task %s, K in {", task_s.c_str());
            for (size_t i = 0; i < k_grid.size(); ++i)
                std::printf("%s%d", i ? ", " : "", k_grid[i]);
            std::printf("}\n");
            std::vector<EvalRecord> records =
                compression_sweep<T>(spec, corpus, tc, k_grid, eval_opts);
            append_records(metrics_path, records);
            PlotSeries s;
            s.label = task_s;
            for (size_t i = 0; i < records.size(); ++i) {
                s.x.push_back(k_grid[i]);
                s.y.push_back(100.0 * records[i].wer);
                std::printf("  K=%d: WER %.2f%%  tokens/utt %.1f\n", k_grid[i],
                            100.0 * records[i].wer, records[i].tokens_mean);
            }
            series.push_back(std::move(s));
        }
        PlotConfig pc;
        pc.title = "WER vs compression rate";
        pc.x_label = "compression rate K";
        pc.y_label = "WER (%)";
        for (int k : k_grid) pc.x_ticks.emplace_back(k, std::to_string(k));
        write_text_file((fs::path(cfg.out_dir) / "wer_vs_k.svg").string(),
                        render_line_plot_svg(series, pc));
        std::printf("wrote %s\n", (fs::path(cfg.out_dir) / "wer_vs_k.svg").c_str());
    }

    if (!snr_grid.empty()) {
        // noise-robustness rows: audio-only versus audio-visual
        TrainConfig tc = cfg.train;
        tc.noise_enabled = true;

        ModelSpec asr_spec = cfg.model;
        asr_spec.task = Task::kAsr;
        asr_spec.seed = cfg.seed;
        asr_spec.audio_projector.k = snr_k_audio;
        std::printf("noise sweep: training ASR (K_a=%d) with SNR-randomized babble\n",
                    snr_k_audio);
        auto asr_model = build_model<T>(asr_spec);
        train_model(*asr_model, corpus, tc);

        ModelSpec avsr_spec = cfg.model;
        avsr_spec.task = Task::kAvsr;
        avsr_spec.seed = cfg.seed;
        avsr_spec.audio_projector.k = snr_k_audio;
        avsr_spec.video_projector.k = snr_k_video;
        std::printf("noise sweep: training AVSR (K_a=%d, K_v=%d)\n", snr_k_audio, snr_k_video);
        auto avsr_model = build_model<T>(avsr_spec);
        train_model(*avsr_model, corpus, tc);

        EvalOptions snr_opts = eval_opts;
        snr_opts.babble_speakers = tc.noise.babble_speakers;
        std::vector<const AvsrModelT<T>*> models = {asr_model.get(), avsr_model.get()};
        std::vector<EvalRecord> records = noise_sweep(models, corpus, snr_grid, snr_opts);
        append_records(metrics_path, records);
        std::printf("%s", format_noise_table(records, snr_grid).c_str());

        std::vector<PlotSeries> series(2);
        series[0].label = "asr";
        series[1].label = "avsr";
        PlotConfig pc;
        pc.title = "WER vs SNR";
        pc.x_label = "SNR (dB)";
        pc.y_label = "WER (%)";
        double finite_max = 20.0;
        for (double s : snr_grid)
            if (!std::isinf(s)) finite_max = std::max(finite_max, s);
        for (double s : snr_grid) {
            const double x = std::isinf(s) ? finite_max + 10.0 : s;
            pc.x_ticks.emplace_back(x, format_snr_label(s));
        }
        for (const auto& r : records) {
            const double x = std::isinf(r.snr_db) ? finite_max + 10.0 : r.snr_db;
            if (r.task == "asr") {
                series[0].x.push_back(x);
                series[0].y.push_back(100.0 * r.wer);
            } else {
                series[1].x.push_back(x);
                series[1].y.push_back(100.0 * r.wer);
            }
        }
        write_text_file((fs::path(cfg.out_dir) / "wer_vs_snr.svg").string(),
                        render_line_plot_svg(series, pc));
        std::printf("wrote %s\n", (fs::path(cfg.out_dir) / "wer_vs_snr.svg").c_str());
    }
    std::printf("metrics: %s\n", metrics_path.c_str());
    return kExitOk;
}

template <typename T>
int run_decode(const std::string& ckpt_path, const std::string& corpus_dir,
               const std::string& utt_id, const DecodeConfig& dc, bool greedy) {
    auto model = load_checkpoint<T>(ckpt_path);
    Corpus corpus = load_corpus(corpus_dir);
    const Utterance* utt = nullptr;
    size_t index = 0;
    for (size_t i = 0; i < corpus.utterances.size(); ++i) {
        if (corpus.utterances[i].id == utt_id) {
            utt = &corpus.utterances[i];
            index = i;
            break;
        }
    }
    if (!utt) throw ConfigError("decode: utterance '" + utt_id + "' not found");

    std::optional<TensorT<T>> audio, video;
    Rng rng(0xDEC0DE);
    std::vector<size_t> all(corpus.utterances.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    if (model->spec.uses_audio()) {
        audio = detail::preprocess_audio<T>(corpus, all, index, utt->snr_db, 5, rng);
    }
    if (model->spec.uses_video()) video = detail::preprocess_video<T>(*utt);

    auto out = decode_utterance<T>(*model, audio, video, dc, !greedy);
    std::printf("utterance : %s (%s split)\n", utt->id.c_str(), utt->split.c_str());
    std::ostringstream ref;
    for (size_t i = 0; i < utt->words.size(); ++i) ref << (i ? " " : "") << utt->words[i];
    std::printf("reference : %s\n", ref.str().c_str());
    std::printf("hypothesis: %s\n", model->tokenizer.decode(out.tokens).c_str());
    std::printf("log score : %.4f%s\n", out.log_score, out.truncated ? "  (truncated)" : "");
    const double w = wer(utt->words, model->tokenizer.decode_words(out.tokens));
    std::printf("wer       : %.2f%%\n", 100.0 * w);
    return kExitOk;
}

template <typename F32Fn, typename F64Fn>
int dispatch_precision(const std::string& precision, F32Fn f32, F64Fn f64) {
    if (precision == "f64") return f64();
    if (precision == "f32") return f32();
    throw ConfigError("precision must be f32 or f64");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tinyavsr: a desk-scale audio-visual speech recognition lab"};
    app.require_subcommand(1);

    // --- generate-data ---------------------------------------------------------
    auto* gen = app.add_subcommand("generate-data", "synthesize a toy corpus directory");
    std::string gen_config, gen_out;
    uint64_t gen_seed = 0;
    int gen_n = -1, gen_vocab = -1;
    bool gen_force = false;
    gen->add_option("--config", gen_config, "run config JSON");
    gen->add_option("--out", gen_out, "output corpus directory");
    gen->add_option("--seed", gen_seed, "corpus seed");
    gen->add_option("--n", gen_n, "number of utterances");
    gen->add_option("--vocab-size", gen_vocab, "content vocabulary size");
    gen->add_flag("--force", gen_force, "overwrite a non-empty directory");

    // --- train -----------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "train projectors + LoRA on a corpus");
    CommonTrainFlags tf;
    bool dry_run = false;
    tr->add_option("--config", tf.config_path, "run config JSON");
    tr->add_option("--corpus", tf.corpus_dir, "corpus directory");
    tr->add_option("--out", tf.out_dir, "output directory");
    tr->add_option("--task", tf.task, "asr | vsr | avsr");
    tr->add_option("--seed", tf.seed, "run seed");
    tr->add_option("--precision", tf.precision, "f32 | f64");
    tr->add_option("--epochs", tf.epochs, "training epochs");
    tr->add_option("--batch-size", tf.batch_size, "batch size");
    tr->add_option("--lr", tf.lr, "peak learning rate (default 1e-3 asr/avsr, 5e-4 vsr)");
    tr->add_option("--lora-rank", tf.lora_rank, "decoder LoRA rank");
    tr->add_option("--k-audio", tf.k_audio, "audio compression rate");
    tr->add_option("--k-video", tf.k_video, "video compression rate");
    tr->add_option("--time-mask-rho", tf.time_mask_rho, "adaptive time-mask budget");
    tr->add_flag("--noise{1},--no-noise{0}", tf.noise, "SNR-randomized babble injection");
    tr->add_flag("--video-encoder-lora", tf.video_encoder_lora,
                 "adapt the video encoder too (VSR)");
    tr->add_flag("--dry-run", dry_run, "validate config and print the run header only");

    // --- evaluate ----------------------------------------------------------------
    auto* ev = app.add_subcommand("evaluate", "decode a test split and report WER");
    std::string ev_ckpt, ev_corpus, ev_out, ev_snr = "inf", ev_split = "test";
    int ev_beam = -1, ev_limit = 0, ev_max_new = -1;
    double ev_temp = -1;
    bool ev_greedy = false;
    uint64_t ev_seed = 0xE7A1;
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
    ev->add_option("--corpus", ev_corpus, "corpus directory")->required();
    ev->add_option("--out", ev_out, "output directory for metrics records");
    ev->add_option("--snr", ev_snr, "evaluation SNR in dB, or 'inf'");
    ev->add_option("--split", ev_split, "corpus split (default test)");
    ev->add_option("--beam-width", ev_beam, "beam width (default 15)");
    ev->add_option("--temperature", ev_temp, "decoding temperature (default 0.6)");
    ev->add_option("--max-new-tokens", ev_max_new, "generation cap");
    ev->add_option("--limit", ev_limit, "evaluate at most N utterances");
    ev->add_option("--seed", ev_seed, "noise draw seed");
    ev->add_flag("--greedy", ev_greedy, "greedy decoding instead of beam search");

    // --- sweep ---------------------------------------------------------------------
    auto* sw = app.add_subcommand("sweep", "compression and noise sweeps with SVG figures");
    CommonTrainFlags sf;
    std::string sw_kgrid, sw_snrgrid, sw_tasks = "asr,vsr";
    int sw_limit = 100, sw_snr_ka = 2, sw_snr_kv = 1;
    sw->add_option("--config", sf.config_path, "run config JSON");
    sw->add_option("--corpus", sf.corpus_dir, "corpus directory");
    sw->add_option("--out", sf.out_dir, "output directory");
    sw->add_option("--seed", sf.seed, "run seed");
    sw->add_option("--precision", sf.precision, "f32 | f64");
    sw->add_option("--epochs", sf.epochs, "training epochs per grid cell");
    sw->add_option("--batch-size", sf.batch_size, "batch size");
    sw->add_option("--lr", sf.lr, "peak learning rate");
    sw->add_option("--k-grid", sw_kgrid, "comma list of compression rates, e.g. 1,2,3,4,5");
    sw->add_option("--snr-grid", sw_snrgrid, "comma list of SNRs in dB ('inf' allowed)");
    sw->add_option("--tasks", sw_tasks, "tasks for the K sweep (default asr,vsr)");
    sw->add_option("--eval-limit", sw_limit, "utterances per evaluation cell");
    sw->add_option("--snr-k-audio", sw_snr_ka, "audio K for the noise-sweep rows");
    sw->add_option("--snr-k-video", sw_snr_kv, "video K for the AVSR noise-sweep row");

    // --- decode ----------------------------------------------------------------------
    auto* dc = app.add_subcommand("decode", "decode a single utterance (debug)");
    std::string dc_ckpt, dc_corpus, dc_id;
    int dc_beam = -1, dc_max_new = -1;
    double dc_temp = -1;
    bool dc_greedy = false;
    dc->add_option("--checkpoint", dc_ckpt, "checkpoint file")->required();
    dc->add_option("--corpus", dc_corpus, "corpus directory")->required();
    dc->add_option("--id", dc_id, "utterance id, e.g. u000042")->required();
    dc->add_option("--beam-width", dc_beam, "beam width");
    dc->add_option("--temperature", dc_temp, "decoding temperature");
    dc->add_option("--max-new-tokens", dc_max_new, "generation cap");
    dc->add_flag("--greedy", dc_greedy, "greedy decoding");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (gen->parsed()) {
            RunConfig cfg;
            if (!gen_config.empty()) cfg = load_run_config(gen_config);
            if (gen_seed != 0) cfg.corpus.seed = gen_seed;
            if (gen_n >= 0) cfg.corpus.n_utterances = gen_n;
            if (gen_vocab >= 0) cfg.corpus.vocab_size = gen_vocab;
            if (gen_out.empty()) gen_out = cfg.out_dir;
            ensure_out_dir(gen_out, "corpus");
            cfg.corpus.validate();
            Corpus corpus = generate_corpus(cfg.corpus);
            save_corpus(corpus, gen_out, gen_force);
            std::printf("corpus: %s\n", gen_out.c_str());
            std::printf("splits: train %zu  valid %zu  test %zu\n",
                        corpus.split_indices("train").size(),
                        corpus.split_indices("valid").size(),
                        corpus.split_indices("test").size());
            return kExitOk;
        }
        if (tr->parsed()) {
            RunConfig cfg = resolve_config(tf);
            return dispatch_precision(
                cfg.precision, [&] { return run_train<float>(cfg, dry_run); },
                [&] { return run_train<double>(cfg, dry_run); });
        }
        if (ev->parsed()) {
            EvalOptions opts;
            opts.snr_db = parse_snr(ev_snr);
            opts.split = ev_split;
            opts.limit = ev_limit;
            opts.seed = ev_seed;
            opts.use_beam = !ev_greedy;
            if (ev_beam >= 1) opts.decode.beam_width = ev_beam;
            if (ev_temp > 0) opts.decode.temperature = ev_temp;
            if (ev_max_new >= 1) opts.decode.max_new_tokens = ev_max_new;
            const std::string dtype = checkpoint_dtype(ev_ckpt);
            return dispatch_precision(
                dtype, [&] { return run_evaluate<float>(ev_ckpt, ev_corpus, ev_out, opts); },
                [&] { return run_evaluate<double>(ev_ckpt, ev_corpus, ev_out, opts); });
        }
        if (sw->parsed()) {
            RunConfig cfg = resolve_config(sf);
            const std::vector<int> k_grid = parse_int_grid(sw_kgrid);
            const std::vector<double> snr_grid = parse_snr_grid(sw_snrgrid);
            std::vector<std::string> tasks;
            std::stringstream ss(sw_tasks);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) tasks.push_back(item);
            }
            return dispatch_precision(
                cfg.precision,
                [&] {
                    return run_sweep<float>(cfg, k_grid, snr_grid, tasks, sw_limit, sw_snr_ka,
                                            sw_snr_kv);
                },
                [&] {
                    return run_sweep<double>(cfg, k_grid, snr_grid, tasks, sw_limit, sw_snr_ka,
                                             sw_snr_kv);
                });
        }
        if (dc->parsed()) {
            DecodeConfig dconf;
            if (dc_beam >= 1) dconf.beam_width = dc_beam;
            if (dc_temp > 0) dconf.temperature = dc_temp;
            if (dc_max_new >= 1) dconf.max_new_tokens = dc_max_new;
            const std::string dtype = checkpoint_dtype(dc_ckpt);
            return dispatch_precision(
                dtype,
                [&] { return run_decode<float>(dc_ckpt, dc_corpus, dc_id, dconf, dc_greedy); },
                [&] { return run_decode<double>(dc_ckpt, dc_corpus, dc_id, dconf, dc_greedy); });
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const ParamError& e) {
        std::fprintf(stderr, "parameter error: %s\n", e.what());
        return kExitConfig;
    } catch (const TrainAbort& e) {
        std::fprintf(stderr, "training aborted: %s\n", e.what());
        if (!e.snapshot.empty()) std::fprintf(stderr, "diagnostic: %s\n", e.snapshot.c_str());
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitConfig;
}
