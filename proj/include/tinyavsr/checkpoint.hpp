#pragma once

// Checkpoint format ("TAVSRCK1"): a JSON header describing the model spec and
// every named parameter (shape, trainable flag, byte offset), followed by one
// contiguous little-endian float blob. Stable across versions via the
// format_version field; LoRA adapters live under their "lora.<target>.A/B"
// names so they can be extracted independently of the frozen base.

#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "tinyavsr/model.hpp"
#include "tinyavsr/serde.hpp"

namespace avsr {

inline constexpr char kCheckpointMagic[9] = "TAVSRCK1";

template <typename T>
constexpr const char* dtype_name() {
    if constexpr (std::is_same_v<T, float>) return "f32";
    else return "f64";
}

template <typename T>
void save_checkpoint(const AvsrModelT<T>& model, const std::string& path) {
    json params = json::array();
    size_t offset = 0;
    for (const auto& name : model.params.names()) {
        const auto& tensor = model.params.at(name);
        const size_t nbytes = tensor.data().size() * sizeof(T);
        params.push_back(json{{"name", name},
                              {"shape", tensor.shape()},
                              {"trainable", model.params.trainable(name)},
                              {"offset", offset},
                              {"nbytes", nbytes}});
        offset += nbytes;
    }
    json header{{"format_version", 1},
                {"dtype", dtype_name<T>()},
                {"model_spec", model.spec},
                {"params", params}};
    const std::string header_str = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open checkpoint '" + path + "' for writing");
    os.write(kCheckpointMagic, 8);
    const uint32_t hlen = static_cast<uint32_t>(header_str.size());
    os.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& name : model.params.names()) {
        const auto& tensor = model.params.at(name);
        os.write(reinterpret_cast<const char*>(tensor.data().data()),
                 static_cast<std::streamsize>(tensor.data().size() * sizeof(T)));
    }
    if (!os) throw ConfigError("failed while writing checkpoint '" + path + "'");
}

inline json read_checkpoint_header(std::ifstream& is, const std::string& path) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw ConfigError("'" + path + "' is not a checkpoint");
    }
    uint32_t hlen = 0;
    is.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string header_str(hlen, '\0');
    is.read(header_str.data(), hlen);
    if (!is) throw ConfigError("'" + path + "': truncated header");
    json header = json::parse(header_str);
    if (header.at("format_version").get<int>() != 1) {
        throw ConfigError("'" + path + "': unsupported checkpoint version");
    }
    return header;
}

inline std::string checkpoint_dtype(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open checkpoint '" + path + "'");
    return read_checkpoint_header(is, path).at("dtype").get<std::string>();
}

inline ModelSpec checkpoint_model_spec(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open checkpoint '" + path + "'");
    return read_checkpoint_header(is, path).at("model_spec").get<ModelSpec>();
}

// Rebuilds the model from the stored spec and overwrites every parameter from
// the blob. Values are cast elementwise if the stored dtype differs from T.
template <typename T>
std::unique_ptr<AvsrModelT<T>> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open checkpoint '" + path + "'");
    json header = read_checkpoint_header(is, path);
    const std::string dtype = header.at("dtype").get<std::string>();

    ModelSpec spec = header.at("model_spec").get<ModelSpec>();
    auto model = build_model<T>(spec);

    const std::streampos data_start = is.tellg();
    for (const auto& p : header.at("params")) {
        const std::string name = p.at("name").get<std::string>();
        const Shape shape = p.at("shape").get<Shape>();
        if (!model->params.contains(name)) {
            throw ConfigError("checkpoint param '" + name + "' not present in rebuilt model");
        }
        auto& tensor = model->params.at(name);
        if (tensor.shape() != shape) {
            throw ConfigError("checkpoint param '" + name + "' shape mismatch");
        }
        const size_t offset = p.at("offset").get<size_t>();
        const size_t nbytes = p.at("nbytes").get<size_t>();
        is.seekg(data_start + static_cast<std::streamoff>(offset));
        if (dtype == dtype_name<T>()) {
            is.read(reinterpret_cast<char*>(tensor.mutable_data().data()),
                    static_cast<std::streamsize>(nbytes));
        } else if (dtype == "f32") {
            std::vector<float> tmp(nbytes / sizeof(float));
            is.read(reinterpret_cast<char*>(tmp.data()), static_cast<std::streamsize>(nbytes));
            for (size_t i = 0; i < tmp.size(); ++i)
                tensor.mutable_data()[i] = static_cast<T>(tmp[i]);
        } else if (dtype == "f64") {
            std::vector<double> tmp(nbytes / sizeof(double));
            is.read(reinterpret_cast<char*>(tmp.data()), static_cast<std::streamsize>(nbytes));
            for (size_t i = 0; i < tmp.size(); ++i)
                tensor.mutable_data()[i] = static_cast<T>(tmp[i]);
        } else {
            throw ConfigError("checkpoint dtype '" + dtype + "' not supported");
        }
        if (!is) throw ConfigError("checkpoint '" + path + "': truncated data");
    }
    model->params.bump_version();
    return model;
}

}  // namespace avsr
