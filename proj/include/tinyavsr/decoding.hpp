#pragma once

// Auto-regressive generation over the response span: greedy and beam search
// with temperature-scaled scores, EOS handling and incremental KV caching.
// Search routines are templated over a session type so oracle tests can run
// them against tabular toy models; the real backend is KvSessionT.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tinyavsr/common.hpp"
#include "tinyavsr/model.hpp"

namespace avsr {

enum class LengthNorm { kNone, kByLength };

struct DecodeConfig {
    int beam_width = 15;
    double temperature = 0.6;
    int max_new_tokens = 48;
    LengthNorm length_normalization = LengthNorm::kNone;

    void validate() const {
        if (beam_width < 1) throw ParamError("decode: beam_width must be >= 1");
        if (temperature <= 0.0) throw ParamError("decode: temperature must be > 0");
        if (max_new_tokens < 1) throw ParamError("decode: max_new_tokens must be >= 1");
    }
};

struct Hypothesis {
    std::vector<int> tokens;  // generated ids, EOS excluded
    double log_score = 0.0;   // cumulative temperature-scaled log-probs, EOS step included
    bool finished = false;

    double normalized_score(LengthNorm norm) const {
        if (norm == LengthNorm::kByLength) {
            return log_score / std::max<size_t>(1, tokens.size());
        }
        return log_score;
    }
};

struct GreedyResult {
    std::vector<int> tokens;  // emitted ids; ends with EOS unless truncated
    double log_score = 0.0;
    bool truncated = false;
};

inline std::vector<double> log_softmax_scaled(const std::vector<double>& logits, double tau) {
    if (logits.empty()) throw DegenerateInputError("log_softmax: empty logits");
    std::vector<double> out(logits.size());
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double denom = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = (logits[i] - mx) / tau;
        denom += std::exp(out[i]);
    }
    const double log_denom = std::log(denom);
    for (auto& v : out) v -= log_denom;
    return out;
}

// --- search over a generic session ------------------------------------------------
//
// A session must provide:
//   const std::vector<double>& logits();  // next-token logits after the prefix
//   void advance(int token);
//   Session fork() const;
//   int eos_id() const;

template <typename Session>
GreedyResult greedy_decode(Session session, const DecodeConfig& cfg) {
    cfg.validate();
    GreedyResult result;
    for (int step = 0; step < cfg.max_new_tokens; ++step) {
        const std::vector<double> lp = log_softmax_scaled(session.logits(), cfg.temperature);
        int best = 0;
        for (size_t j = 1; j < lp.size(); ++j)
            if (lp[j] > lp[best]) best = static_cast<int>(j);
        result.tokens.push_back(best);
        result.log_score += lp[static_cast<size_t>(best)];
        if (best == session.eos_id()) return result;
        session.advance(best);
    }
    result.truncated = true;
    return result;
}

namespace detail {

inline bool lex_less(const std::vector<int>& a, const std::vector<int>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace detail

// Breadth-pruned search. Expands every live hypothesis over the vocabulary,
// keeps the top beam_width candidates by cumulative score (ties broken toward
// the lexicographically smaller token sequence), moves EOS extensions to the
// completed pool, and stops when no live hypothesis can still beat the best
// completed score. Returns the completed pool sorted by normalized score; if
// nothing completed, the best truncated live hypothesis is returned flagged.
template <typename Session>
std::vector<Hypothesis> beam_search(Session session, const DecodeConfig& cfg) {
    cfg.validate();

    struct Live {
        Hypothesis hyp;
        Session session;
    };
    std::vector<Live> live;
    live.push_back({Hypothesis{}, std::move(session)});
    std::vector<Hypothesis> completed;

    const int eos = live[0].session.eos_id();

    auto better = [&cfg](const Hypothesis& a, const Hypothesis& b) {
        const double sa = a.normalized_score(cfg.length_normalization);
        const double sb = b.normalized_score(cfg.length_normalization);
        if (sa != sb) return sa > sb;
        return detail::lex_less(a.tokens, b.tokens);
    };

    for (int step = 0; step < cfg.max_new_tokens && !live.empty(); ++step) {
        struct Candidate {
            size_t parent;
            int token;
            double score;
        };
        std::vector<Candidate> candidates;
        candidates.reserve(live.size() * 8);
        for (size_t i = 0; i < live.size(); ++i) {
            const std::vector<double> lp =
                log_softmax_scaled(live[i].session.logits(), cfg.temperature);
            for (size_t v = 0; v < lp.size(); ++v) {
                candidates.push_back({i, static_cast<int>(v), live[i].hyp.log_score + lp[v]});
            }
        }
        auto cand_less = [&](const Candidate& a, const Candidate& b) {
            if (a.score != b.score) return a.score > b.score;
            // lexicographic on the full token sequence
            const auto& ta = live[a.parent].hyp.tokens;
            const auto& tb = live[b.parent].hyp.tokens;
            const size_t n = std::min(ta.size(), tb.size());
            for (size_t i = 0; i < n; ++i)
                if (ta[i] != tb[i]) return ta[i] < tb[i];
            if (ta.size() != tb.size()) return ta.size() < tb.size();
            return a.token < b.token;
        };
        const size_t keep = std::min(candidates.size(), static_cast<size_t>(cfg.beam_width));
        std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end(),
                          cand_less);
        candidates.resize(keep);

        std::vector<Live> next_live;
        next_live.reserve(keep);
        for (const auto& c : candidates) {
            Hypothesis h = live[c.parent].hyp;
            h.log_score = c.score;
            if (c.token == eos) {
                h.finished = true;
                completed.push_back(std::move(h));
            } else {
                h.tokens.push_back(c.token);
                Session forked = live[c.parent].session.fork();
                forked.advance(c.token);
                next_live.push_back({std::move(h), std::move(forked)});
            }
        }
        live = std::move(next_live);

        if (!completed.empty() && !live.empty()) {
            double best_completed = completed[0].normalized_score(cfg.length_normalization);
            for (const auto& h : completed)
                best_completed =
                    std::max(best_completed, h.normalized_score(cfg.length_normalization));
            double best_live_bound = -std::numeric_limits<double>::infinity();
            for (const auto& l : live) {
                const double bound =
                    cfg.length_normalization == LengthNorm::kByLength
                        ? l.hyp.log_score / static_cast<double>(cfg.max_new_tokens)
                        : l.hyp.log_score;
                best_live_bound = std::max(best_live_bound, bound);
            }
            if (best_live_bound <= best_completed) break;
        }
    }

    if (completed.empty()) {
        // nothing reached EOS: surface the best truncated hypothesis, flagged
        Hypothesis best;
        bool have = false;
        for (auto& l : live) {
            if (!have || better(l.hyp, best)) {
                best = l.hyp;
                have = true;
            }
        }
        if (!have) throw ContractError("beam_search: no hypotheses produced");
        best.finished = false;
        return {best};
    }
    std::sort(completed.begin(), completed.end(), better);
    return completed;
}

// --- incremental session over the real model ---------------------------------------

template <typename T>
class KvSessionT {
public:
    KvSessionT(const AvsrModelT<T>& model, const TensorT<T>& prefix_embeddings)
        : model_(&model),
          params_version_(model.params.version()),
          caches_(model.decoder.blocks.size()) {
        NoGradGuard ng;
        if (prefix_embeddings.numel() > 0) {
            TensorT<T> logits = decoder_logits(model_->decoder, &model_->decoder_adapters,
                                               prefix_embeddings, 0, &caches_);
            pos_ = prefix_embeddings.rows();
            set_logits_from_row(logits, logits.rows() - 1);
        }
    }

    // Logits for the next position. Empty until the first advance when the
    // session started from an empty prefix.
    const std::vector<double>& logits() const {
        if (logits_.empty()) throw StateError("KvSession: no logits yet (empty prefix)");
        return logits_;
    }

    // Feeds one token and recomputes next-position logits (the incremental
    // step). Throws ContractError if the weights changed under the cache.
    void advance(int token) {
        check_version();
        NoGradGuard ng;
        TensorT<T> emb = embedding(model_->decoder.token_embedding, {token});
        TensorT<T> logits =
            decoder_logits(model_->decoder, &model_->decoder_adapters, emb, pos_, &caches_);
        pos_ += 1;
        if (caches_[0].len != pos_) {
            throw ContractError("KvSession: cache length diverged from position");
        }
        set_logits_from_row(logits, 0);
    }

    KvSessionT fork() const { return *this; }

    int eos_id() const { return Tokenizer::kEos; }
    int position() const { return pos_; }

private:
    void check_version() const {
        if (model_->params.version() != params_version_) {
            throw ContractError(
                "KvSession: parameters changed since the cache was built; start a new session");
        }
    }

    void set_logits_from_row(const TensorT<T>& logits, int row) {
        const int v = logits.cols();
        logits_.resize(static_cast<size_t>(v));
        for (int j = 0; j < v; ++j) logits_[static_cast<size_t>(j)] =
            static_cast<double>(logits.at(row, j));
    }

    const AvsrModelT<T>* model_;
    uint64_t params_version_;
    std::vector<LayerCacheT<T>> caches_;
    int pos_ = 0;
    std::vector<double> logits_;
};

// Convenience: decode one utterance with the model pipeline.
template <typename T>
struct UtteranceDecode {
    GreedyResult greedy;                 // populated in greedy mode
    std::vector<Hypothesis> hypotheses;  // populated in beam mode
    std::vector<int> tokens;             // winning body tokens, EOS stripped
    double log_score = 0.0;
    bool truncated = false;
};

template <typename T>
UtteranceDecode<T> decode_utterance(const AvsrModelT<T>& model,
                                    const std::optional<std::type_identity_t<TensorT<T>>>& audio,
                                    const std::optional<std::type_identity_t<TensorT<T>>>& video,
                                    const DecodeConfig& cfg, bool use_beam) {
    NoGradGuard ng;
    FusedSequenceT<T> prefix = assemble(model, audio, video, {}, FuseMode::kInfer);
    KvSessionT<T> session(model, prefix.embeddings);
    UtteranceDecode<T> out;
    if (use_beam) {
        out.hypotheses = beam_search(std::move(session), cfg);
        const Hypothesis& best = out.hypotheses.front();
        out.tokens = best.tokens;
        out.log_score = best.log_score;
        out.truncated = !best.finished;
    } else {
        out.greedy = greedy_decode(std::move(session), cfg);
        out.tokens = out.greedy.tokens;
        if (!out.tokens.empty() && out.tokens.back() == Tokenizer::kEos) out.tokens.pop_back();
        out.log_score = out.greedy.log_score;
        out.truncated = out.greedy.truncated;
    }
    return out;
}

}  // namespace avsr
