#include "tinyavsr/tokenizer.hpp"

#include <sstream>

#include "tinyavsr/wer.hpp"

namespace avsr {

const char* task_name(Task task) {
    switch (task) {
        case Task::kAsr: return "asr";
        case Task::kVsr: return "vsr";
        case Task::kAvsr: return "avsr";
    }
    throw ParamError("task_name: invalid task");
}

Task task_from_name(const std::string& name) {
    if (name == "asr" || name == "ASR") return Task::kAsr;
    if (name == "vsr" || name == "VSR") return Task::kVsr;
    if (name == "avsr" || name == "AVSR") return Task::kAvsr;
    throw ParamError("unknown task '" + name + "' (expected asr, vsr or avsr)");
}

Tokenizer::Tokenizer(int n_content_words) : n_content_(n_content_words) {
    if (n_content_words < 1) throw ConfigError("tokenizer: need at least one content word");
    words_ = {"<pad>", "<bos>", "<eos>", "<sep>",
              "Transcribe", "speech", "and", "video", "to", "text."};
    first_content_ = static_cast<int>(words_.size());
    for (int i = 0; i < n_content_words; ++i) words_.push_back(content_word(i));
    for (size_t i = 0; i < words_.size(); ++i) ids_[words_[i]] = static_cast<int>(i);
}

std::string Tokenizer::content_word(int index) {
    std::ostringstream os;
    os << "w" << (index < 10 ? "0" : "") << index;
    return os.str();
}

int Tokenizer::id_of(const std::string& word) const {
    auto it = ids_.find(word);
    if (it == ids_.end()) throw ConfigError("tokenizer: unknown word '" + word + "'");
    return it->second;
}

const std::string& Tokenizer::word_of(int id) const {
    if (id < 0 || id >= vocab_size()) {
        throw ParamError("tokenizer: id " + std::to_string(id) + " outside vocabulary");
    }
    return words_[static_cast<size_t>(id)];
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
    return encode_words(split_words(text));
}

std::vector<int> Tokenizer::encode_words(const std::vector<std::string>& words) const {
    std::vector<int> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(id_of(w));
    return out;
}

std::vector<std::string> Tokenizer::decode_words(const std::vector<int>& ids,
                                                 bool skip_special) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int id : ids) {
        if (skip_special && id < 4) continue;
        out.push_back(word_of(id));
    }
    return out;
}

std::string Tokenizer::decode(const std::vector<int>& ids, bool skip_special) const {
    std::ostringstream os;
    bool first = true;
    for (const auto& w : decode_words(ids, skip_special)) {
        if (!first) os << " ";
        os << w;
        first = false;
    }
    return os.str();
}

PromptTemplate build_prompt(Task task, const Tokenizer& tokenizer) {
    std::string task_prompt;
    switch (task) {
        case Task::kAsr: task_prompt = "speech"; break;
        case Task::kVsr: task_prompt = "video"; break;
        case Task::kAvsr: task_prompt = "speech and video"; break;
        default: throw ParamError("build_prompt: invalid task");
    }
    PromptTemplate p;
    p.task = task;
    p.text = "Transcribe " + task_prompt + " to text.";
    p.ids = tokenizer.encode(p.text);
    return p;
}

}  // namespace avsr
