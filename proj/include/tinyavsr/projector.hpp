#pragma once

// Modality projector: stack K consecutive encoder frames along the feature
// dimension, then map into the LLM embedding space through two linear layers
// with a ReLU in between. The stacking step trades sequence length for width;
// the projector is otherwise frame-wise.

#include <cmath>
#include <cstdint>
#include <string>

#include "tinyavsr/common.hpp"
#include "tinyavsr/param_store.hpp"
#include "tinyavsr/tensor.hpp"

namespace avsr {

struct ProjectorConfig {
    int k = 1;         // compression rate
    int d_enc = 0;     // encoder feature width
    int d_hidden = 0;  // 0 means the d_model default
    int d_model = 0;   // LLM embedding width

    int hidden() const { return d_hidden > 0 ? d_hidden : d_model; }
    int input_width() const { return k * d_enc; }

    void validate() const {
        if (k < 1) throw ParamError("projector: K must be >= 1");
        if (d_enc < 1 || d_model < 1) throw ConfigError("projector: widths must be positive");
    }

    int64_t param_count() const {
        const int64_t h = hidden(), in = input_width(), out = d_model;
        return in * h + h + h * out + out;
    }
};

template <typename T>
struct ProjectorT {
    ProjectorConfig cfg;
    TensorT<T> w1, b1;  // [K*d_enc x d_hidden], [d_hidden]
    TensorT<T> w2, b2;  // [d_hidden x d_model], [d_model]

    int64_t param_count() const {
        return w1.numel() + b1.numel() + w2.numel() + b2.numel();
    }
};

template <typename T>
ProjectorT<T> make_projector(const ProjectorConfig& cfg, Rng& rng) {
    cfg.validate();
    ProjectorT<T> p;
    p.cfg = cfg;
    const int in = cfg.input_width(), h = cfg.hidden(), out = cfg.d_model;
    const T s1 = static_cast<T>(1.0 / std::sqrt(static_cast<double>(in)));
    const T s2 = static_cast<T>(1.0 / std::sqrt(static_cast<double>(h)));
    p.w1 = TensorT<T>::randn({in, h}, rng, s1);
    p.b1 = TensorT<T>::zeros({h});
    p.w2 = TensorT<T>::randn({h, out}, rng, s2);
    p.b2 = TensorT<T>::zeros({out});
    return p;
}

template <typename T>
void register_projector_params(ParamStoreT<T>& store, const std::string& prefix,
                               ProjectorT<T>& p, bool trainable = true) {
    store.register_param(prefix + ".lin1.w", p.w1, trainable);
    store.register_param(prefix + ".lin1.b", p.b1, trainable);
    store.register_param(prefix + ".lin2.w", p.w2, trainable);
    store.register_param(prefix + ".lin2.b", p.b2, trainable);
    // share storage with the registered tensors
    p.w1 = store.at(prefix + ".lin1.w");
    p.b1 = store.at(prefix + ".lin1.b");
    p.w2 = store.at(prefix + ".lin2.w");
    p.b2 = store.at(prefix + ".lin2.b");
}

// Linear2(ReLU(Linear1(stacked))); purely row-wise.
template <typename T>
TensorT<T> project(const ProjectorT<T>& p, const TensorT<T>& stacked) {
    if (stacked.cols() != p.cfg.input_width()) {
        throw ConfigError("project: input width " + std::to_string(stacked.cols()) +
                          " does not match K*d_enc = " + std::to_string(p.cfg.input_width()));
    }
    TensorT<T> h = relu(add_rowvec(matmul(stacked, p.w1), p.b1));
    return add_rowvec(matmul(h, p.w2), p.b2);
}

// Full connector: stacking followed by the two-layer map.
template <typename T>
TensorT<T> projector_forward(const ProjectorT<T>& p, const TensorT<T>& features) {
    return project(p, stack_compress(features, p.cfg.k));
}

// Number of LLM tokens a clip of the given duration produces.
inline int token_budget(double duration_s, double frame_rate, int k) {
    if (duration_s <= 0 || frame_rate <= 0) {
        throw ParamError("token_budget: duration and frame rate must be positive");
    }
    if (k < 1) throw ParamError("token_budget: K must be >= 1");
    const double frames = duration_s * frame_rate;
    return static_cast<int>(std::ceil(frames / k - 1e-9));
}

// Same law on an integer frame count.
inline int token_count(int frames, int k) {
    if (frames < 1) throw ParamError("token_count: frames must be >= 1");
    if (k < 1) throw ParamError("token_count: K must be >= 1");
    return (frames + k - 1) / k;
}

}  // namespace avsr
