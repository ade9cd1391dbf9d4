#include "tinyavsr/run_config.hpp"

#include <cstdlib>
#include <fstream>

#include "tinyavsr/serde.hpp"

namespace avsr {

void RunConfig::normalize() {
    model.task = task;
    model.seed = seed;
    train.seed = seed;
    corpus.vocab_size = std::max(corpus.vocab_size, 1);
    model.n_content_words = corpus.vocab_size;
    // encoder input widths follow the corpus feature widths
    model.audio_encoder.d_in = corpus.d_audio;
    model.video_encoder.d_in = corpus.d_video;
}

void RunConfig::validate() const {
    if (precision != "f32" && precision != "f64") {
        throw ConfigError("run config: precision must be f32 or f64");
    }
    corpus.validate();
    train.validate();
    decode.validate();
    model.decoder.validate();
    if (model.audio_projector.k < 1 || model.video_projector.k < 1) {
        throw ConfigError("run config: compression rates must be >= 1");
    }
}

static void run_config_from_json(const json& j, RunConfig& cfg) {
    if (j.contains("task")) cfg.task = task_from_name(j.at("task").get<std::string>());
    maybe(j, "seed", cfg.seed);
    maybe(j, "precision", cfg.precision);
    maybe(j, "corpus_dir", cfg.corpus_dir);
    maybe(j, "out_dir", cfg.out_dir);
    maybe(j, "corpus", cfg.corpus);
    maybe(j, "model", cfg.model);
    maybe(j, "train", cfg.train);
    maybe(j, "decode", cfg.decode);
    cfg.normalize();
}

RunConfig run_config_from_json_text(const std::string& text) {
    RunConfig cfg;
    run_config_from_json(json::parse(text), cfg);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path + "'");
    RunConfig cfg;
    try {
        run_config_from_json(json::parse(is), cfg);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return cfg;
}

std::string run_config_to_json_text(const RunConfig& cfg) {
    json j{{"task", task_name(cfg.task)},
           {"seed", cfg.seed},
           {"precision", cfg.precision},
           {"corpus_dir", cfg.corpus_dir},
           {"out_dir", cfg.out_dir},
           {"corpus", cfg.corpus},
           {"model", cfg.model},
           {"train", cfg.train},
           {"decode", cfg.decode}};
    return j.dump(2) + "\n";
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write config '" + path + "'");
    os << run_config_to_json_text(cfg);
}

std::string default_out_root() {
    if (const char* env = std::getenv("TINYAVSR_OUT_ROOT")) return env;
    return "runs";
}

}  // namespace avsr
