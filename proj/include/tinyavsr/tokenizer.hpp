#pragma once

// Word-level tokenizer over the synthetic vocabulary: four structural
// specials, the fixed prompt words, and n content symbols ("w00", "w01", ...).

#include <string>
#include <unordered_map>
#include <vector>

#include "tinyavsr/common.hpp"

namespace avsr {

enum class Task { kAsr, kVsr, kAvsr };

const char* task_name(Task task);
Task task_from_name(const std::string& name);

class Tokenizer {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kSep = 3;

    explicit Tokenizer(int n_content_words);

    int vocab_size() const { return static_cast<int>(words_.size()); }
    int n_content_words() const { return n_content_; }
    int first_content_id() const { return first_content_; }

    bool contains(const std::string& word) const { return ids_.count(word) > 0; }
    int id_of(const std::string& word) const;
    const std::string& word_of(int id) const;

    std::vector<int> encode(const std::string& text) const;
    std::vector<int> encode_words(const std::vector<std::string>& words) const;
    std::vector<std::string> decode_words(const std::vector<int>& ids,
                                          bool skip_special = true) const;
    std::string decode(const std::vector<int>& ids, bool skip_special = true) const;

    static std::string content_word(int index);

private:
    int n_content_ = 0;
    int first_content_ = 0;
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> ids_;
};

struct PromptTemplate {
    Task task;
    std::string text;       // exact rendered prompt
    std::vector<int> ids;   // word-level tokenization
};

// "Transcribe {task_prompt} to text." with task_prompt in
// {"speech", "video", "speech and video"}.
PromptTemplate build_prompt(Task task, const Tokenizer& tokenizer);

}  // namespace avsr
