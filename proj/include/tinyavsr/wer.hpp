#pragma once

#include <string>
#include <vector>

#include "tinyavsr/common.hpp"

namespace avsr {

struct EditCounts {
    int substitutions = 0;
    int deletions = 0;
    int insertions = 0;
    int hits = 0;
};

// Minimal-edit-distance alignment counts with uniform costs.
EditCounts edit_counts(const std::vector<std::string>& reference,
                       const std::vector<std::string>& hypothesis);

// (S + D + I) / N_ref. Throws DegenerateInputError on an empty reference.
double wer(const std::vector<std::string>& reference,
           const std::vector<std::string>& hypothesis);

// Whitespace tokenizer used by WER reporting.
std::vector<std::string> split_words(const std::string& text);

}  // namespace avsr
