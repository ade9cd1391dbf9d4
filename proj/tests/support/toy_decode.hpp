#pragma once

// Tabular toy decoders for search oracles: next-token logits are a
// deterministic hash of the generated prefix, so exhaustive enumeration and
// beam search can be compared exactly.

#include <limits>
#include <vector>

#include "tinyavsr/decoding.hpp"

namespace avsr::testsupport {

struct TabularModel {
    uint64_t seed = 1;
    int vocab = 4;
    int eos = 0;
    double spread = 2.0;

    std::vector<double> logits(const std::vector<int>& prefix) const {
        uint64_t h = seed * 0x9e3779b97f4a7c15ull + 0x51ull;
        for (int t : prefix) h = (h ^ static_cast<uint64_t>(t + 1)) * 0x100000001b3ull;
        Rng r(h);
        std::vector<double> out(static_cast<size_t>(vocab));
        for (auto& v : out) v = r.normal() * spread;
        return out;
    }
};

struct TabularSession {
    const TabularModel* model = nullptr;
    std::vector<int> prefix;
    std::vector<double> cur;

    explicit TabularSession(const TabularModel& m) : model(&m), cur(m.logits({})) {}

    const std::vector<double>& logits() const { return cur; }
    void advance(int token) {
        prefix.push_back(token);
        cur = model->logits(prefix);
    }
    TabularSession fork() const { return *this; }
    int eos_id() const { return model->eos; }
};

struct ExhaustiveBest {
    double completed = -std::numeric_limits<double>::infinity();
    double truncated = -std::numeric_limits<double>::infinity();
};

// Enumerates every generation trace up to the horizon with beam-identical
// scoring: EOS closes a sequence, anything else extends it.
inline void exhaustive_search(const TabularModel& m, std::vector<int>& prefix, double score,
                              int horizon, double tau, ExhaustiveBest& best) {
    const std::vector<double> lp = log_softmax_scaled(m.logits(prefix), tau);
    for (int v = 0; v < m.vocab; ++v) {
        const double s = score + lp[static_cast<size_t>(v)];
        if (v == m.eos) {
            best.completed = std::max(best.completed, s);
        } else if (static_cast<int>(prefix.size()) + 1 >= horizon) {
            best.truncated = std::max(best.truncated, s);
        } else {
            prefix.push_back(v);
            exhaustive_search(m, prefix, s, horizon, tau, best);
            prefix.pop_back();
        }
    }
}

inline ExhaustiveBest exhaustive_best(const TabularModel& m, int horizon, double tau) {
    ExhaustiveBest best;
    std::vector<int> prefix;
    exhaustive_search(m, prefix, 0.0, horizon, tau, best);
    return best;
}

}  // namespace avsr::testsupport
