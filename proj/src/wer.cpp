#include "tinyavsr/wer.hpp"

#include <algorithm>
#include <sstream>

namespace avsr {

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

EditCounts edit_counts(const std::vector<std::string>& reference,
                       const std::vector<std::string>& hypothesis) {
    const size_t n = reference.size(), m = hypothesis.size();
    // cost matrix plus backtrace over {match/sub, delete, insert}
    std::vector<std::vector<int>> cost(n + 1, std::vector<int>(m + 1, 0));
    for (size_t i = 0; i <= n; ++i) cost[i][0] = static_cast<int>(i);
    for (size_t j = 0; j <= m; ++j) cost[0][j] = static_cast<int>(j);
    for (size_t i = 1; i <= n; ++i) {
        for (size_t j = 1; j <= m; ++j) {
            const int sub = cost[i - 1][j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
            const int del = cost[i - 1][j] + 1;
            const int ins = cost[i][j - 1] + 1;
            cost[i][j] = std::min({sub, del, ins});
        }
    }
    EditCounts c;
    size_t i = n, j = m;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0 &&
            cost[i][j] == cost[i - 1][j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1)) {
            if (reference[i - 1] == hypothesis[j - 1]) {
                ++c.hits;
            } else {
                ++c.substitutions;
            }
            --i;
            --j;
        } else if (i > 0 && cost[i][j] == cost[i - 1][j] + 1) {
            ++c.deletions;
            --i;
        } else {
            ++c.insertions;
            --j;
        }
    }
    return c;
}

double wer(const std::vector<std::string>& reference,
           const std::vector<std::string>& hypothesis) {
    if (reference.empty()) throw DegenerateInputError("wer: empty reference");
    const EditCounts c = edit_counts(reference, hypothesis);
    return static_cast<double>(c.substitutions + c.deletions + c.insertions) /
           static_cast<double>(reference.size());
}

}  // namespace avsr
