#pragma once

// Named parameter registry with per-parameter trainable/frozen flags. The
// training regime only ever updates projector and LoRA parameters; encoder and
// decoder base weights are registered as locked so they can never be marked
// trainable by accident.

#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "tinyavsr/common.hpp"
#include "tinyavsr/tensor.hpp"

namespace avsr {

template <typename T>
class ParamStoreT {
public:
    struct Entry {
        TensorT<T> tensor;
        bool trainable = false;
        bool base_locked = false;  // frozen base weight; may never become trainable
    };

    void register_param(const std::string& name, const TensorT<T>& tensor, bool trainable,
                        bool base_locked = false) {
        if (entries_.count(name)) throw ConfigError("param '" + name + "' already registered");
        if (trainable && base_locked) {
            throw PolicyError("param '" + name + "' cannot be both trainable and base-locked");
        }
        Entry e;
        e.tensor = tensor;
        e.tensor.set_requires_grad(trainable);
        e.trainable = trainable;
        e.base_locked = base_locked;
        entries_.emplace(name, std::move(e));
    }

    bool contains(const std::string& name) const { return entries_.count(name) > 0; }

    TensorT<T>& at(const std::string& name) { return entry(name).tensor; }
    const TensorT<T>& at(const std::string& name) const { return entry(name).tensor; }

    bool trainable(const std::string& name) const { return entry(name).trainable; }
    bool base_locked(const std::string& name) const { return entry(name).base_locked; }

    void set_trainable(const std::string& name, bool value) {
        Entry& e = entry(name);
        if (value && e.base_locked) {
            throw PolicyError("param '" + name + "' is a frozen base weight");
        }
        e.trainable = value;
        e.tensor.set_requires_grad(value);
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& [k, v] : entries_) out.push_back(k);
        return out;
    }

    std::vector<std::string> trainable_names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : entries_)
            if (v.trainable) out.push_back(k);
        return out;
    }

    std::vector<std::string> frozen_names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : entries_)
            if (!v.trainable) out.push_back(k);
        return out;
    }

    int64_t total_params() const {
        int64_t n = 0;
        for (const auto& [k, v] : entries_) n += v.tensor.numel();
        return n;
    }

    int64_t trainable_params() const {
        int64_t n = 0;
        for (const auto& [k, v] : entries_)
            if (v.trainable) n += v.tensor.numel();
        return n;
    }

    void zero_grads() {
        for (auto& [k, v] : entries_) v.tensor.zero_grad();
    }

    // Mutation counter; bumps invalidate decode caches built on older weights.
    uint64_t version() const { return version_; }
    void bump_version() { ++version_; }

    // FNV-1a over the raw bytes of every frozen parameter, name included.
    // Used in freeze-audit reports; tests also byte-compare full snapshots.
    uint64_t frozen_fingerprint() const {
        uint64_t h = 0xcbf29ce484222325ull;
        auto mix = [&h](const void* p, size_t n) {
            const unsigned char* b = static_cast<const unsigned char*>(p);
            for (size_t i = 0; i < n; ++i) {
                h ^= b[i];
                h *= 0x100000001b3ull;
            }
        };
        for (const auto& [name, e] : entries_) {
            if (e.trainable) continue;
            mix(name.data(), name.size());
            mix(e.tensor.data().data(), e.tensor.data().size() * sizeof(T));
        }
        return h;
    }

    std::map<std::string, std::vector<T>> snapshot_frozen() const {
        std::map<std::string, std::vector<T>> out;
        for (const auto& [name, e] : entries_)
            if (!e.trainable) out[name] = e.tensor.data();
        return out;
    }

private:
    Entry& entry(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ConfigError("unknown param '" + name + "'");
        return it->second;
    }
    const Entry& entry(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw ConfigError("unknown param '" + name + "'");
        return it->second;
    }

    std::map<std::string, Entry> entries_;
    uint64_t version_ = 0;
};

}  // namespace avsr
