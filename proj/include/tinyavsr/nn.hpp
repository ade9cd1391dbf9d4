#pragma once

// Transformer building blocks: a causal decoder with rotary positions (the
// toy LLM) and small bidirectional encoders with learned absolute positions
// that stand in for pre-trained audio/video encoders. Encoders are frozen at
// birth; the decoder base is frozen too and only LoRA adapters on designated
// attention projections learn.

#include <cmath>
#include <optional>
#include <type_traits>
#include <string>
#include <vector>

#include "tinyavsr/common.hpp"
#include "tinyavsr/lora.hpp"
#include "tinyavsr/param_store.hpp"
#include "tinyavsr/tensor.hpp"

namespace avsr {

struct TransformerConfig {
    int n_layers = 4;
    int d_model = 128;
    int n_heads = 4;
    int ffn_mult = 4;
    int vocab_size = 0;  // decoder only
    int max_seq_len = 256;
    bool causal = true;
    double init_std = 0.02;

    int d_head() const { return d_model / n_heads; }
    int d_ffn() const { return d_model * ffn_mult; }

    void validate() const {
        if (n_layers < 1 || d_model < 1 || n_heads < 1) {
            throw ConfigError("transformer: layers, width and heads must be positive");
        }
        if (d_model % n_heads != 0) {
            throw ConfigError("transformer: d_model " + std::to_string(d_model) +
                              " not divisible by n_heads " + std::to_string(n_heads));
        }
        if (d_head() % 2 != 0) {
            throw ConfigError("transformer: head width must be even for rotary positions");
        }
        if (max_seq_len < 1) throw ConfigError("transformer: max_seq_len must be positive");
    }
};

template <typename T>
struct BlockAdaptersT {
    std::optional<LoraAdapterT<T>> q, k, v, o;

    const std::optional<LoraAdapterT<T>>& by_name(const std::string& name) const {
        if (name == "q") return q;
        if (name == "k") return k;
        if (name == "v") return v;
        if (name == "o") return o;
        throw ConfigError("unknown lora target '" + name + "'");
    }
    std::optional<LoraAdapterT<T>>& by_name(const std::string& name) {
        return const_cast<std::optional<LoraAdapterT<T>>&>(
            static_cast<const BlockAdaptersT*>(this)->by_name(name));
    }
};

template <typename T>
using ModelAdaptersT = std::vector<BlockAdaptersT<T>>;  // one entry per block

template <typename T>
struct TransformerT {
    TransformerConfig cfg;
    bool use_rope = true;        // decoder: rotary; encoders: learned absolute
    TensorT<T> token_embedding;  // [V x d], decoder only
    TensorT<T> pos_embedding;    // [max_seq_len x d], encoders only

    struct Block {
        TensorT<T> g_attn, g_ffn;   // rms-norm gains
        TensorT<T> wq, wk, wv, wo;  // [d x d]
        TensorT<T> w_ffn1;          // [d x d*mult]
        TensorT<T> w_ffn2;          // [d*mult x d]
    };
    std::vector<Block> blocks;
    TensorT<T> g_final;
    TensorT<T> lm_head;  // [d x V], decoder only
};

// Collects attention weights for inspection; rows are softmax distributions.
template <typename T>
struct AttnTraceT {
    std::vector<TensorT<T>> probs;  // one [Tq x S] per (layer, head)
};

namespace detail {

template <typename T>
typename TransformerT<T>::Block make_block(const TransformerConfig& cfg, Rng& rng) {
    typename TransformerT<T>::Block b;
    const int d = cfg.d_model, f = cfg.d_ffn();
    const T s = static_cast<T>(cfg.init_std);
    b.g_attn = TensorT<T>::full({d}, T(1));
    b.g_ffn = TensorT<T>::full({d}, T(1));
    b.wq = TensorT<T>::randn({d, d}, rng, s);
    b.wk = TensorT<T>::randn({d, d}, rng, s);
    b.wv = TensorT<T>::randn({d, d}, rng, s);
    b.wo = TensorT<T>::randn({d, d}, rng, s);
    b.w_ffn1 = TensorT<T>::randn({d, f}, rng, s);
    b.w_ffn2 = TensorT<T>::randn({f, d}, rng, s);
    return b;
}

}  // namespace detail

template <typename T>
TransformerT<T> make_decoder(const TransformerConfig& cfg, Rng& rng) {
    cfg.validate();
    if (cfg.vocab_size < 1) throw ConfigError("decoder: vocab_size must be positive");
    TransformerT<T> m;
    m.cfg = cfg;
    m.cfg.causal = true;
    m.use_rope = true;
    const int d = cfg.d_model;
    m.token_embedding = TensorT<T>::randn({cfg.vocab_size, d}, rng, static_cast<T>(cfg.init_std));
    for (int i = 0; i < cfg.n_layers; ++i) m.blocks.push_back(detail::make_block<T>(cfg, rng));
    m.g_final = TensorT<T>::full({d}, T(1));
    m.lm_head = TensorT<T>::randn({d, cfg.vocab_size}, rng,
                                  static_cast<T>(1.0 / std::sqrt(static_cast<double>(d))));
    return m;
}

template <typename T>
TransformerT<T> make_encoder_stack(const TransformerConfig& cfg, Rng& rng) {
    cfg.validate();
    TransformerT<T> m;
    m.cfg = cfg;
    m.cfg.causal = false;
    m.cfg.vocab_size = 0;
    m.use_rope = false;
    m.pos_embedding =
        TensorT<T>::randn({cfg.max_seq_len, cfg.d_model}, rng, static_cast<T>(cfg.init_std));
    for (int i = 0; i < cfg.n_layers; ++i) m.blocks.push_back(detail::make_block<T>(cfg, rng));
    m.g_final = TensorT<T>::full({cfg.d_model}, T(1));
    return m;
}

// Registers every base weight as locked-frozen.
template <typename T>
void register_transformer_params(ParamStoreT<T>& store, const std::string& prefix,
                                 TransformerT<T>& m) {
    auto reg = [&](const std::string& name, TensorT<T>& t) {
        store.register_param(prefix + "." + name, t, /*trainable=*/false, /*base_locked=*/true);
        t = store.at(prefix + "." + name);
    };
    if (m.token_embedding.numel() > 0) reg("embed", m.token_embedding);
    if (m.pos_embedding.numel() > 0) reg("pos", m.pos_embedding);
    for (size_t i = 0; i < m.blocks.size(); ++i) {
        const std::string bp = "block" + std::to_string(i);
        auto& b = m.blocks[i];
        reg(bp + ".norm_attn.g", b.g_attn);
        reg(bp + ".norm_ffn.g", b.g_ffn);
        reg(bp + ".attn.q", b.wq);
        reg(bp + ".attn.k", b.wk);
        reg(bp + ".attn.v", b.wv);
        reg(bp + ".attn.o", b.wo);
        reg(bp + ".ffn.w1", b.w_ffn1);
        reg(bp + ".ffn.w2", b.w_ffn2);
    }
    reg("norm_final.g", m.g_final);
    if (m.lm_head.numel() > 0) reg("lm_head", m.lm_head);
}

// Builds adapters for the configured targets of every block and registers
// them as trainable under "lora.<prefix>.blockN.attn.<target>.A/B".
template <typename T>
ModelAdaptersT<T> attach_lora(ParamStoreT<T>& store, const std::string& prefix,
                              const TransformerT<T>& m, const LoraConfig& cfg, Rng& rng) {
    ModelAdaptersT<T> adapters(m.blocks.size());
    const int d = m.cfg.d_model;
    for (size_t i = 0; i < m.blocks.size(); ++i) {
        for (const auto& target : cfg.targets) {
            auto& slot = adapters[i].by_name(target);
            slot = make_lora_adapter<T>(d, d, cfg, rng);
            const std::string name =
                "lora." + prefix + ".block" + std::to_string(i) + ".attn." + target;
            store.register_param(name + ".A", slot->a, /*trainable=*/true);
            store.register_param(name + ".B", slot->b, /*trainable=*/true);
            slot->a = store.at(name + ".A");
            slot->b = store.at(name + ".B");
        }
    }
    return adapters;
}

// (d_in, d_out) of every adapted matrix, for parameter accounting.
template <typename T>
std::vector<std::pair<int, int>> lora_target_shapes(const TransformerT<T>& m,
                                                    const LoraConfig& cfg) {
    std::vector<std::pair<int, int>> shapes;
    const int d = m.cfg.d_model;
    for (size_t i = 0; i < m.blocks.size(); ++i)
        for (size_t t = 0; t < cfg.targets.size(); ++t) shapes.emplace_back(d, d);
    return shapes;
}

namespace detail {

template <typename T>
TensorT<T> maybe_lora_linear(const TensorT<T>& x, const TensorT<T>& w,
                             const std::optional<LoraAdapterT<T>>& ad) {
    if (ad.has_value()) return lora_forward(x, w, *ad);
    return matmul(x, w);
}

}  // namespace detail

// Scaled dot-product attention core over already-projected q/k/v of one head.
// `first_query_pos` is the absolute position of q row 0 among the keys.
template <typename T>
TensorT<T> scaled_dot_attention(const TensorT<T>& q, const TensorT<T>& k, const TensorT<T>& v,
                                bool causal, int first_query_pos = 0,
                                AttnTraceT<T>* trace = nullptr) {
    const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(q.cols())));
    TensorT<T> scores = scale(matmul_nt(q, k), inv_sqrt);
    TensorT<T> probs = causal ? causal_softmax(scores, first_query_pos)
                              : softmax_with_temperature(scores, T(1));
    if (trace) trace->probs.push_back(probs.detached());
    return matmul(probs, v);
}

// Per-layer incremental state: per-head keys (rotary already applied) and values.
template <typename T>
struct LayerCacheT {
    std::vector<TensorT<T>> k_heads;  // each [S x d_head]
    std::vector<TensorT<T>> v_heads;
    int len = 0;
};

// Multi-head attention over a chunk of rows starting at absolute position
// `first_pos`. When `cache` is given, new keys/values are appended to it and
// attention spans cached + new positions.
template <typename T>
TensorT<T> causal_self_attention(const typename TransformerT<T>::Block& blk,
                                 const BlockAdaptersT<T>* lora, const TensorT<T>& x,
                                 int n_heads, bool causal, bool use_rope, int first_pos,
                                 LayerCacheT<T>* cache, AttnTraceT<T>* trace) {
    const int d = x.cols();
    const int dh = d / n_heads;
    static const BlockAdaptersT<T> no_adapters{};
    const BlockAdaptersT<T>& ad = lora ? *lora : no_adapters;

    TensorT<T> q = detail::maybe_lora_linear(x, blk.wq, ad.q);
    TensorT<T> k = detail::maybe_lora_linear(x, blk.wk, ad.k);
    TensorT<T> v = detail::maybe_lora_linear(x, blk.wv, ad.v);

    std::vector<TensorT<T>> head_outputs;
    head_outputs.reserve(n_heads);
    for (int h = 0; h < n_heads; ++h) {
        TensorT<T> qh = slice_cols(q, h * dh, dh);
        TensorT<T> kh = slice_cols(k, h * dh, dh);
        TensorT<T> vh = slice_cols(v, h * dh, dh);
        if (use_rope) {
            qh = rope(qh, first_pos);
            kh = rope(kh, first_pos);
        }
        TensorT<T> k_all = kh, v_all = vh;
        if (cache) {
            if (static_cast<int>(cache->k_heads.size()) != n_heads) {
                cache->k_heads.assign(n_heads, TensorT<T>());
                cache->v_heads.assign(n_heads, TensorT<T>());
            }
            if (cache->len > 0) {
                k_all = concat_rows<T>({cache->k_heads[h], kh});
                v_all = concat_rows<T>({cache->v_heads[h], vh});
            }
            cache->k_heads[h] = k_all.detached();
            cache->v_heads[h] = v_all.detached();
        }
        head_outputs.push_back(
            scaled_dot_attention(qh, k_all, v_all, causal, first_pos, trace));
    }
    if (cache) cache->len += x.rows();
    TensorT<T> ctx = concat_cols(head_outputs);
    return detail::maybe_lora_linear(ctx, blk.wo, ad.o);
}

// Hidden-state forward over input embeddings (pre-norm residual blocks).
// `caches`, when provided, must hold one LayerCacheT per block and already
// cover positions [0, first_pos).
template <typename T>
TensorT<T> transformer_hidden(const TransformerT<T>& m, const ModelAdaptersT<T>* adapters,
                              TensorT<T> x, int first_pos = 0,
                              std::vector<std::type_identity_t<LayerCacheT<T>>>* caches = nullptr,
                              std::type_identity_t<AttnTraceT<T>>* trace = nullptr) {
    if (x.cols() != m.cfg.d_model) {
        throw ConfigError("transformer: input width " + std::to_string(x.cols()) +
                          " does not match d_model " + std::to_string(m.cfg.d_model));
    }
    if (first_pos + x.rows() > m.cfg.max_seq_len) {
        throw CapacityError("transformer: sequence length " +
                            std::to_string(first_pos + x.rows()) + " exceeds max_seq_len " +
                            std::to_string(m.cfg.max_seq_len));
    }
    if (adapters && adapters->size() != m.blocks.size()) {
        throw ConfigError("transformer: adapter count does not match block count");
    }
    if (!m.use_rope) {
        x = add(x, slice_rows(m.pos_embedding, first_pos, x.rows()));
    }
    for (size_t i = 0; i < m.blocks.size(); ++i) {
        const auto& blk = m.blocks[i];
        const BlockAdaptersT<T>* ad = adapters ? &(*adapters)[i] : nullptr;
        LayerCacheT<T>* cache = caches ? &(*caches)[i] : nullptr;
        TensorT<T> attn_out =
            causal_self_attention<T>(blk, ad, rms_norm(x, blk.g_attn), m.cfg.n_heads,
                                     m.cfg.causal, m.use_rope, first_pos, cache, trace);
        x = add(x, attn_out);
        TensorT<T> h = rms_norm(x, blk.g_ffn);
        TensorT<T> ffn_out = matmul(relu(matmul(h, blk.w_ffn1)), blk.w_ffn2);
        x = add(x, ffn_out);
    }
    return rms_norm(x, m.g_final);
}

// Per-position next-token logits over the text vocabulary.
template <typename T>
TensorT<T> decoder_logits(const TransformerT<T>& m, const ModelAdaptersT<T>* adapters,
                          const TensorT<T>& embeddings, int first_pos = 0,
                          std::vector<std::type_identity_t<LayerCacheT<T>>>* caches = nullptr,
                          std::type_identity_t<AttnTraceT<T>>* trace = nullptr) {
    if (m.lm_head.numel() == 0) throw ConfigError("decoder_logits: model has no lm head");
    TensorT<T> h = transformer_hidden(m, adapters, embeddings, first_pos, caches, trace);
    return matmul(h, m.lm_head);
}

// --- frozen toy encoders -----------------------------------------------------

enum class Modality { kAudio, kVideo };

inline const char* modality_name(Modality m) {
    return m == Modality::kAudio ? "audio" : "video";
}

struct EncoderConfig {
    int d_in = 0;          // raw feature width
    int n_layers = 2;
    int d_model = 64;      // encoder feature width d_enc
    int n_heads = 4;
    int ffn_mult = 4;
    int max_seq_len = 1024;
    double frame_rate = 50.0;  // audio 50 fps, video 25 fps

    TransformerConfig transformer() const {
        TransformerConfig c;
        c.n_layers = n_layers;
        c.d_model = d_model;
        c.n_heads = n_heads;
        c.ffn_mult = ffn_mult;
        c.vocab_size = 0;
        c.max_seq_len = max_seq_len;
        c.causal = false;
        return c;
    }
};

template <typename T>
struct EncoderOutputT {
    TensorT<T> features;  // [T x d_enc]
    double frame_rate = 0.0;
};

template <typename T>
struct EncoderT {
    EncoderConfig cfg;
    TensorT<T> w_in;  // [d_in x d_model]
    TransformerT<T> stack;
    ModelAdaptersT<T> adapters;  // non-empty only when VSR enables encoder LoRA
    bool has_adapters = false;
};

template <typename T>
EncoderT<T> make_encoder(const EncoderConfig& cfg, Rng& rng) {
    if (cfg.d_in < 1) throw ConfigError("encoder: d_in must be positive");
    EncoderT<T> enc;
    enc.cfg = cfg;
    enc.w_in = TensorT<T>::randn({cfg.d_in, cfg.d_model}, rng,
                                 static_cast<T>(1.0 / std::sqrt(static_cast<double>(cfg.d_in))));
    enc.stack = make_encoder_stack<T>(cfg.transformer(), rng);
    return enc;
}

template <typename T>
void register_encoder_params(ParamStoreT<T>& store, const std::string& prefix,
                             EncoderT<T>& enc) {
    store.register_param(prefix + ".w_in", enc.w_in, /*trainable=*/false, /*base_locked=*/true);
    enc.w_in = store.at(prefix + ".w_in");
    register_transformer_params(store, prefix, enc.stack);
}

// Deterministic frozen features. Without adapters the pass runs untaped; with
// encoder LoRA (VSR) gradients flow to the adapters only.
template <typename T>
EncoderOutputT<T> frozen_encoder_forward(const EncoderT<T>& enc, const TensorT<T>& raw) {
    if (raw.cols() != enc.cfg.d_in) {
        throw ConfigError("encoder: raw width " + std::to_string(raw.cols()) +
                          " does not match d_in " + std::to_string(enc.cfg.d_in));
    }
    auto run = [&]() {
        TensorT<T> x = matmul(raw, enc.w_in);
        TensorT<T> feats =
            transformer_hidden(enc.stack, enc.has_adapters ? &enc.adapters : nullptr, x);
        return EncoderOutputT<T>{feats, enc.cfg.frame_rate};
    };
    if (!enc.has_adapters) {
        NoGradGuard ng;
        return run();
    }
    return run();
}

}  // namespace avsr
