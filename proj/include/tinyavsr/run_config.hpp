#pragma once

// The reproducibility unit behind every CLI subcommand: a fully serializable
// description of one run. Archived next to each run's outputs so any result
// can be regenerated from the config alone.

#include <string>

#include "tinyavsr/data.hpp"
#include "tinyavsr/decoding.hpp"
#include "tinyavsr/model.hpp"
#include "tinyavsr/train.hpp"

namespace avsr {

struct RunConfig {
    Task task = Task::kAsr;
    uint64_t seed = 1;
    std::string precision = "f32";  // f32 | f64
    std::string corpus_dir;
    std::string out_dir;

    ToyCorpusSpec corpus;
    ModelSpec model = default_model_spec(Task::kAsr);
    TrainConfig train;
    DecodeConfig decode;

    // pushes top-level task/seed into the nested specs
    void normalize();
    void validate() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json_text(const std::string& text);
std::string run_config_to_json_text(const RunConfig& cfg);
void save_run_config(const RunConfig& cfg, const std::string& path);

// default output root: $TINYAVSR_OUT_ROOT or ./runs
std::string default_out_root();

}  // namespace avsr
