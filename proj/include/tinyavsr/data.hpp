#pragma once

// Synthetic audio-visual toy corpus. Each content word renders as fixed
// hidden embeddings (one audio table, one independent video table) plus
// Gaussian emission noise; audio carries two frames per word and video one,
// preserving the 2:1 frame-rate ratio of the real pipelines. Babble noise is
// synthesized from other utterances' audio features and mixed at exact SNR.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "tinyavsr/common.hpp"
#include "tinyavsr/tensor.hpp"
#include "tinyavsr/tokenizer.hpp"

namespace avsr {

inline constexpr double kInfSnr = std::numeric_limits<double>::infinity();

struct ToyCorpusSpec {
    int vocab_size = 32;  // content words
    int n_utterances = 2500;
    int min_words = 4;
    int max_words = 16;
    int frames_per_word_audio = 2;
    int frames_per_word_video = 1;
    int d_audio = 32;
    int d_video = 24;
    double emission_noise_std = 0.1;
    double train_frac = 0.8;
    double valid_frac = 0.1;
    uint64_t seed = 1;

    void validate() const {
        if (vocab_size < 1) throw ConfigError("corpus: vocab_size must be positive");
        if (n_utterances < 1) throw ConfigError("corpus: n_utterances must be positive");
        if (min_words < 1 || max_words < min_words) {
            throw ConfigError("corpus: bad utterance length range");
        }
        if (frames_per_word_audio < 1 || frames_per_word_video < 1) {
            throw ConfigError("corpus: frames per word must be positive");
        }
        if (d_audio < 1 || d_video < 1) throw ConfigError("corpus: feature widths must be positive");
        if (train_frac <= 0 || valid_frac < 0 || train_frac + valid_frac >= 1.0) {
            throw ConfigError("corpus: split fractions must leave room for a test split");
        }
        if (emission_noise_std < 0) throw ConfigError("corpus: emission noise must be >= 0");
    }
};

struct NoiseSpec {
    std::vector<double> snr_levels_db = {-5, 0, 5, 10, 15, 20, kInfSnr};
    int babble_speakers = 5;

    double draw_level(Rng& rng) const {
        if (snr_levels_db.empty()) throw ConfigError("noise: empty SNR level list");
        return snr_levels_db[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int>(snr_levels_db.size()) - 1))];
    }
};

struct Utterance {
    std::string id;
    std::string split;  // train | valid | test
    std::vector<std::string> words;
    Tensor32 audio;  // [2*words x d_audio]
    Tensor32 video;  // [words x d_video]
    double snr_db = kInfSnr;  // SNR applied to the materialized audio features
};

struct Corpus {
    ToyCorpusSpec spec;
    std::vector<Utterance> utterances;

    std::vector<size_t> split_indices(const std::string& split) const {
        std::vector<size_t> out;
        for (size_t i = 0; i < utterances.size(); ++i)
            if (utterances[i].split == split) out.push_back(i);
        return out;
    }
};

Corpus generate_corpus(const ToyCorpusSpec& spec, int n_utterances);

inline Corpus generate_corpus(const ToyCorpusSpec& spec) {
    return generate_corpus(spec, spec.n_utterances);
}

// Mean of `speakers` other utterances' audio features, cyclically tiled to
// `rows`, standing in for multi-speaker babble. The pooled utterances are
// drawn from `candidates` (e.g. the train split) excluding `self_index`.
Tensor32 make_babble(const Corpus& corpus, const std::vector<size_t>& candidates,
                     size_t self_index, int rows, int speakers, Rng& rng);
Tensor32 make_babble(const Corpus& corpus, size_t self_index, int rows, int speakers,
                     Rng& rng);

// --- feature-level perturbations (precision-generic) --------------------------------

// clean + g*noise with g chosen so that 10*log10(P_clean / P_scaled_noise)
// equals snr_db, powers taken as mean squared value. Infinite SNR returns the
// clean signal unchanged.
template <typename T>
TensorT<T> mix_noise_at_snr(const TensorT<T>& clean, const TensorT<T>& noise, double snr_db) {
    if (std::isinf(snr_db) && snr_db > 0) return clean;
    if (clean.shape() != noise.shape()) {
        throw ShapeError("mix_noise_at_snr: shape mismatch " + shape_str(clean.shape()) +
                         " vs " + shape_str(noise.shape()));
    }
    double p_clean = 0.0, p_noise = 0.0;
    for (T v : clean.data()) p_clean += static_cast<double>(v) * v;
    for (T v : noise.data()) p_noise += static_cast<double>(v) * v;
    p_clean /= static_cast<double>(clean.numel());
    p_noise /= static_cast<double>(noise.numel());
    if (p_clean <= 0.0) throw DegenerateInputError("mix_noise_at_snr: clean power is zero");
    if (p_noise <= 0.0) {
        throw DegenerateInputError("mix_noise_at_snr: noise power is zero at finite SNR");
    }
    const double gain = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
    std::vector<T> out(clean.data().size());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = clean.data()[i] + static_cast<T>(gain) * noise.data()[i];
    }
    return TensorT<T>::from_vector(clean.shape(), std::move(out));
}

// Utterance-level standardization: mean 0, standard deviation 1 over all
// elements; constant input maps to zeros through the std floor.
template <typename T>
TensorT<T> z_normalize(const TensorT<T>& features) {
    if (features.numel() < 2) throw DegenerateInputError("z_normalize: need at least 2 values");
    double mean = 0.0;
    for (T v : features.data()) mean += static_cast<double>(v);
    mean /= static_cast<double>(features.numel());
    double var = 0.0;
    for (T v : features.data()) {
        const double d = static_cast<double>(v) - mean;
        var += d * d;
    }
    var /= static_cast<double>(features.numel());
    const double stddev = std::sqrt(var);
    if (stddev < 1e-8) return TensorT<T>::zeros(features.shape());  // constant input
    std::vector<T> out(features.data().size());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<T>((static_cast<double>(features.data()[i]) - mean) / stddev);
    }
    return TensorT<T>::from_vector(features.shape(), std::move(out));
}

// Masks up to floor(rho*T) frames across S = max(1, floor(T/25)) spans;
// masked frames are replaced by the utterance mean vector. Training-time only;
// the evaluation pipeline never calls this.
template <typename T>
TensorT<T> adaptive_time_mask(const TensorT<T>& features, double rho, Rng& rng) {
    if (rho < 0.0 || rho >= 1.0) throw ParamError("adaptive_time_mask: rho must be in [0, 1)");
    const int t = features.rows(), d = features.cols();
    const int budget = static_cast<int>(rho * t);
    if (budget == 0) return features.detached();

    std::vector<double> mean_vec(static_cast<size_t>(d), 0.0);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < d; ++j) mean_vec[static_cast<size_t>(j)] += features.at(i, j);
    for (auto& v : mean_vec) v /= t;

    const int spans = std::max(1, t / 25);
    const int max_span = std::max(1, budget / spans);
    std::vector<T> out = features.data();
    int used = 0;
    for (int s = 0; s < spans && used < budget; ++s) {
        const int len = std::min(rng.uniform_int(1, max_span), budget - used);
        const int start = rng.uniform_int(0, t - len);
        for (int i = start; i < start + len; ++i)
            for (int j = 0; j < d; ++j)
                out[static_cast<size_t>(i) * d + j] = static_cast<T>(mean_vec[static_cast<size_t>(j)]);
        used += len;
    }
    return TensorT<T>::from_vector(features.shape(), std::move(out));
}

// Achieved SNR re-estimated from the known clean/scaled-noise decomposition.
template <typename T>
double measure_snr_db(const TensorT<T>& clean, const TensorT<T>& mixed) {
    double p_clean = 0.0, p_noise = 0.0;
    for (size_t i = 0; i < clean.data().size(); ++i) {
        const double c = static_cast<double>(clean.data()[i]);
        const double n = static_cast<double>(mixed.data()[i]) - c;
        p_clean += c * c;
        p_noise += n * n;
    }
    if (p_noise == 0.0) return kInfSnr;
    return 10.0 * std::log10(p_clean / p_noise);
}

// --- on-disk corpus format ----------------------------------------------------------
//
// directory layout:
//   corpus.json     format version, generation spec, split counts
//   manifest.jsonl  one record per utterance: id, split, words, snr_db
//   feat/<id>.audio.bin / feat/<id>.video.bin
// feature files: magic "TAVSRFT1", u32 ndim, u64 dims[ndim], f32 data (LE)

void save_corpus(const Corpus& corpus, const std::string& dir, bool force = false);
Corpus load_corpus(const std::string& dir);

void save_feature_file(const std::string& path, const Tensor32& t);
Tensor32 load_feature_file(const std::string& path);

}  // namespace avsr
