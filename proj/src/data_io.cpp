#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "tinyavsr/data.hpp"
#include "tinyavsr/wer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace avsr {

namespace {

constexpr char kFeatureMagic[9] = "TAVSRFT1";

std::string utterance_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "u%06d", index);
    return buf;
}

json snr_to_json(double snr_db) {
    if (std::isinf(snr_db)) return "inf";
    return snr_db;
}

double snr_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return kInfSnr;
        throw ConfigError("manifest: bad snr_db string '" + j.get<std::string>() + "'");
    }
    return j.get<double>();
}

}  // namespace

Corpus generate_corpus(const ToyCorpusSpec& spec, int n_utterances) {
    spec.validate();
    if (n_utterances < 1) throw ConfigError("generate_corpus: need at least one utterance");

    Corpus corpus;
    corpus.spec = spec;
    corpus.spec.n_utterances = n_utterances;

    Rng table_rng = Rng(spec.seed).fork(0xA0D10);
    // per-word render tables, fixed for the whole corpus
    const int a_rows = spec.frames_per_word_audio, v_rows = spec.frames_per_word_video;
    std::vector<float> audio_table(static_cast<size_t>(spec.vocab_size) * a_rows * spec.d_audio);
    std::vector<float> video_table(static_cast<size_t>(spec.vocab_size) * v_rows * spec.d_video);
    for (auto& v : audio_table) v = static_cast<float>(table_rng.normal());
    Rng vtable_rng = Rng(spec.seed).fork(0x71DE0);
    for (auto& v : video_table) v = static_cast<float>(vtable_rng.normal());

    const int n_train = static_cast<int>(spec.train_frac * n_utterances);
    const int n_valid = static_cast<int>(spec.valid_frac * n_utterances);

    corpus.utterances.reserve(static_cast<size_t>(n_utterances));
    for (int u = 0; u < n_utterances; ++u) {
        Rng rng = Rng(spec.seed).fork(0x5EED00 + static_cast<uint64_t>(u));
        Utterance utt;
        utt.id = utterance_id(u);
        utt.split = u < n_train ? "train" : (u < n_train + n_valid ? "valid" : "test");

        const int n_words = rng.uniform_int(spec.min_words, spec.max_words);
        std::vector<float> audio(static_cast<size_t>(n_words) * a_rows * spec.d_audio);
        std::vector<float> video(static_cast<size_t>(n_words) * v_rows * spec.d_video);
        for (int w = 0; w < n_words; ++w) {
            const int word = rng.uniform_int(0, spec.vocab_size - 1);
            utt.words.push_back(Tokenizer::content_word(word));
            const float* asrc = audio_table.data() +
                                static_cast<size_t>(word) * a_rows * spec.d_audio;
            float* adst = audio.data() + static_cast<size_t>(w) * a_rows * spec.d_audio;
            for (int i = 0; i < a_rows * spec.d_audio; ++i) {
                adst[i] = asrc[i] +
                          static_cast<float>(rng.normal() * spec.emission_noise_std);
            }
            const float* vsrc = video_table.data() +
                                static_cast<size_t>(word) * v_rows * spec.d_video;
            float* vdst = video.data() + static_cast<size_t>(w) * v_rows * spec.d_video;
            for (int i = 0; i < v_rows * spec.d_video; ++i) {
                vdst[i] = vsrc[i] +
                          static_cast<float>(rng.normal() * spec.emission_noise_std);
            }
        }
        utt.audio = Tensor32::from_vector({n_words * a_rows, spec.d_audio}, std::move(audio));
        utt.video = Tensor32::from_vector({n_words * v_rows, spec.d_video}, std::move(video));
        corpus.utterances.push_back(std::move(utt));
    }
    return corpus;
}

Tensor32 make_babble(const Corpus& corpus, const std::vector<size_t>& candidates,
                     size_t self_index, int rows, int speakers, Rng& rng) {
    if (candidates.size() < 2) {
        throw DegenerateInputError("make_babble: need at least two candidate utterances");
    }
    if (rows < 1 || speakers < 1) throw ParamError("make_babble: bad rows/speakers");
    const int d = corpus.utterances[0].audio.cols();
    std::vector<float> acc(static_cast<size_t>(rows) * d, 0.0f);
    int used = 0;
    for (int s = 0; s < speakers; ++s) {
        size_t pick = self_index;
        for (int attempt = 0; attempt < 64 && pick == self_index; ++attempt) {
            pick = candidates[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int>(candidates.size()) - 1))];
        }
        if (pick == self_index) continue;
        const Tensor32& other = corpus.utterances[pick].audio;
        const int t_other = other.rows();
        const int shift = rng.uniform_int(0, t_other - 1);
        for (int i = 0; i < rows; ++i) {
            const int src = (i + shift) % t_other;
            for (int j = 0; j < d; ++j) {
                acc[static_cast<size_t>(i) * d + j] += other.at(src, j);
            }
        }
        ++used;
    }
    if (used == 0) throw DegenerateInputError("make_babble: no other utterances picked");
    for (auto& v : acc) v /= static_cast<float>(used);
    return Tensor32::from_vector({rows, d}, std::move(acc));
}

Tensor32 make_babble(const Corpus& corpus, size_t self_index, int rows, int speakers,
                     Rng& rng) {
    std::vector<size_t> all(corpus.utterances.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    return make_babble(corpus, all, self_index, rows, speakers, rng);
}

void save_feature_file(const std::string& path, const Tensor32& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open '" + path + "' for writing");
    os.write(kFeatureMagic, 8);
    const uint32_t ndim = static_cast<uint32_t>(t.shape().size());
    os.write(reinterpret_cast<const char*>(&ndim), sizeof(ndim));
    for (int d : t.shape()) {
        const uint64_t dim = static_cast<uint64_t>(d);
        os.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    }
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.data().size() * sizeof(float)));
    if (!os) throw ConfigError("failed while writing '" + path + "'");
}

Tensor32 load_feature_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open '" + path + "'");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kFeatureMagic, 8) != 0) {
        throw ConfigError("'" + path + "' is not a feature file");
    }
    uint32_t ndim = 0;
    is.read(reinterpret_cast<char*>(&ndim), sizeof(ndim));
    if (!is || ndim == 0 || ndim > 4) throw ConfigError("'" + path + "': bad rank");
    Shape shape;
    int64_t numel = 1;
    for (uint32_t i = 0; i < ndim; ++i) {
        uint64_t dim = 0;
        is.read(reinterpret_cast<char*>(&dim), sizeof(dim));
        shape.push_back(static_cast<int>(dim));
        numel *= static_cast<int64_t>(dim);
    }
    std::vector<float> data(static_cast<size_t>(numel));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!is) throw ConfigError("'" + path + "': truncated data");
    return Tensor32::from_vector(shape, std::move(data));
}

namespace {

json spec_to_json(const ToyCorpusSpec& s) {
    return json{{"vocab_size", s.vocab_size},
                {"n_utterances", s.n_utterances},
                {"min_words", s.min_words},
                {"max_words", s.max_words},
                {"frames_per_word_audio", s.frames_per_word_audio},
                {"frames_per_word_video", s.frames_per_word_video},
                {"d_audio", s.d_audio},
                {"d_video", s.d_video},
                {"emission_noise_std", s.emission_noise_std},
                {"train_frac", s.train_frac},
                {"valid_frac", s.valid_frac},
                {"seed", s.seed}};
}

ToyCorpusSpec spec_from_json(const json& j) {
    ToyCorpusSpec s;
    s.vocab_size = j.at("vocab_size").get<int>();
    s.n_utterances = j.at("n_utterances").get<int>();
    s.min_words = j.at("min_words").get<int>();
    s.max_words = j.at("max_words").get<int>();
    s.frames_per_word_audio = j.at("frames_per_word_audio").get<int>();
    s.frames_per_word_video = j.at("frames_per_word_video").get<int>();
    s.d_audio = j.at("d_audio").get<int>();
    s.d_video = j.at("d_video").get<int>();
    s.emission_noise_std = j.at("emission_noise_std").get<double>();
    s.train_frac = j.at("train_frac").get<double>();
    s.valid_frac = j.at("valid_frac").get<double>();
    s.seed = j.at("seed").get<uint64_t>();
    return s;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& dir, bool force) {
    const fs::path root(dir);
    if (fs::exists(root) && !fs::is_empty(root) && !force) {
        throw ConfigError("output directory '" + dir + "' is not empty (use force)");
    }
    fs::create_directories(root / "feat");

    int n_train = 0, n_valid = 0, n_test = 0;
    {
        std::ofstream manifest(root / "manifest.jsonl");
        if (!manifest) throw ConfigError("cannot write manifest in '" + dir + "'");
        for (const auto& u : corpus.utterances) {
            json rec{{"id", u.id},
                     {"split", u.split},
                     {"words", [&] {
                          std::string joined;
                          for (size_t i = 0; i < u.words.size(); ++i) {
                              if (i) joined += " ";
                              joined += u.words[i];
                          }
                          return joined;
                      }()},
                     {"snr_db", snr_to_json(u.snr_db)}};
            manifest << rec.dump() << "\n";
            if (u.split == "train") ++n_train;
            else if (u.split == "valid") ++n_valid;
            else ++n_test;
            save_feature_file((root / "feat" / (u.id + ".audio.bin")).string(), u.audio);
            save_feature_file((root / "feat" / (u.id + ".video.bin")).string(), u.video);
        }
    }
    json header{{"format_version", 1},
                {"spec", spec_to_json(corpus.spec)},
                {"counts", {{"train", n_train}, {"valid", n_valid}, {"test", n_test}}}};
    std::ofstream hdr(root / "corpus.json");
    hdr << header.dump(2) << "\n";
    if (!hdr) throw ConfigError("cannot write corpus.json in '" + dir + "'");
}

Corpus load_corpus(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream hdr(root / "corpus.json");
    if (!hdr) throw ConfigError("'" + dir + "' has no corpus.json");
    json header = json::parse(hdr);
    if (header.at("format_version").get<int>() != 1) {
        throw ConfigError("'" + dir + "': unsupported corpus format version");
    }
    Corpus corpus;
    corpus.spec = spec_from_json(header.at("spec"));

    std::ifstream manifest(root / "manifest.jsonl");
    if (!manifest) throw ConfigError("'" + dir + "' has no manifest.jsonl");
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        Utterance u;
        u.id = rec.at("id").get<std::string>();
        u.split = rec.at("split").get<std::string>();
        u.words = split_words(rec.at("words").get<std::string>());
        u.snr_db = snr_from_json(rec.at("snr_db"));
        u.audio = load_feature_file((root / "feat" / (u.id + ".audio.bin")).string());
        u.video = load_feature_file((root / "feat" / (u.id + ".video.bin")).string());
        corpus.utterances.push_back(std::move(u));
    }
    if (corpus.utterances.empty()) throw ConfigError("'" + dir + "': empty manifest");
    return corpus;
}

}  // namespace avsr
