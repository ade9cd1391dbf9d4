#pragma once

// Low-rank adaptation: additive deltas dW = (alpha/r) * B * A attached to
// designated linear projections of a frozen model. Weights here use the
// row-vector convention y = x * W with W[d_in x d_out]; A is [r x d_in] and
// B is [d_out x r], so the merged matrix is W + (alpha/r) * A^T * B^T.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tinyavsr/common.hpp"
#include "tinyavsr/param_store.hpp"
#include "tinyavsr/tensor.hpp"

namespace avsr {

struct LoraConfig {
    int rank = 64;
    double alpha = 0.0;  // 0 means the 2*rank default
    std::vector<std::string> targets = {"q", "v"};

    double effective_alpha() const { return alpha > 0.0 ? alpha : 2.0 * rank; }

    bool targets_contain(const std::string& name) const {
        for (const auto& t : targets)
            if (t == name) return true;
        return false;
    }
};

template <typename T>
struct LoraAdapterT {
    TensorT<T> a;  // [r x d_in], Gaussian init
    TensorT<T> b;  // [d_out x r], zero init so the adapted model equals the base
    int rank = 0;
    double alpha = 0.0;
    bool merged = false;

    T scaling() const { return static_cast<T>(alpha / rank); }
    int64_t param_count() const { return a.numel() + b.numel(); }
};

template <typename T>
LoraAdapterT<T> make_lora_adapter(int d_in, int d_out, const LoraConfig& cfg, Rng& rng) {
    if (cfg.rank < 1) throw ParamError("lora: rank must be positive");
    if (cfg.rank > std::min(d_in, d_out)) {
        throw ConfigError("lora: rank " + std::to_string(cfg.rank) + " exceeds min(" +
                          std::to_string(d_in) + ", " + std::to_string(d_out) + ")");
    }
    LoraAdapterT<T> ad;
    ad.rank = cfg.rank;
    ad.alpha = cfg.effective_alpha();
    ad.a = TensorT<T>::randn({cfg.rank, d_in}, rng, T(0.02));
    ad.b = TensorT<T>::zeros({d_out, cfg.rank});
    return ad;
}

// y = x*W + (alpha/r) * (x*A^T) * B^T. Gradients flow to A and B only when W
// is frozen; the base product is still differentiable through x.
template <typename T>
TensorT<T> lora_forward(const TensorT<T>& x, const TensorT<T>& w, const LoraAdapterT<T>& ad) {
    if (ad.merged) throw StateError("lora_forward: adapter already merged into base weights");
    if (x.cols() != w.rows()) {
        throw ShapeError("lora_forward: input width " + shape_str(x.shape()) +
                         " vs weights " + shape_str(w.shape()));
    }
    TensorT<T> base = matmul(x, w);
    TensorT<T> delta = matmul_nt(matmul_nt(x, ad.a), ad.b);
    return add(base, scale(delta, ad.scaling()));
}

template <typename T>
void lora_merge(TensorT<T>& w, LoraAdapterT<T>& ad) {
    if (ad.merged) throw StateError("lora_merge: adapter already merged");
    const int d_in = w.rows(), d_out = w.cols(), r = ad.rank;
    const T s = ad.scaling();
    auto& wd = w.mutable_data();
    for (int i = 0; i < d_in; ++i) {
        for (int j = 0; j < d_out; ++j) {
            T acc = T(0);
            for (int p = 0; p < r; ++p) {
                acc += ad.a.data()[static_cast<size_t>(p) * d_in + i] *
                       ad.b.data()[static_cast<size_t>(j) * r + p];
            }
            wd[static_cast<size_t>(i) * d_out + j] += s * acc;
        }
    }
    ad.merged = true;
}

template <typename T>
void lora_unmerge(TensorT<T>& w, LoraAdapterT<T>& ad) {
    if (!ad.merged) throw StateError("lora_unmerge: adapter is not merged");
    const int d_in = w.rows(), d_out = w.cols(), r = ad.rank;
    const T s = ad.scaling();
    auto& wd = w.mutable_data();
    for (int i = 0; i < d_in; ++i) {
        for (int j = 0; j < d_out; ++j) {
            T acc = T(0);
            for (int p = 0; p < r; ++p) {
                acc += ad.a.data()[static_cast<size_t>(p) * d_in + i] *
                       ad.b.data()[static_cast<size_t>(j) * r + p];
            }
            wd[static_cast<size_t>(i) * d_out + j] -= s * acc;
        }
    }
    ad.merged = false;
}

// Sum of r * (d_in + d_out) over every adapted matrix.
inline int64_t count_lora_params(int rank,
                                 const std::vector<std::pair<int, int>>& target_shapes) {
    if (rank < 1) throw ParamError("count_lora_params: rank must be positive");
    int64_t total = 0;
    for (const auto& [d_in, d_out] : target_shapes) {
        if (rank > std::min(d_in, d_out)) {
            throw ConfigError("count_lora_params: rank exceeds target dims");
        }
        total += static_cast<int64_t>(rank) * (d_in + d_out);
    }
    return total;
}

}  // namespace avsr
