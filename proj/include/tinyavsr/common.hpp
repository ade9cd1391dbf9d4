#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace avsr {

// Error taxonomy. Every failure mode in the library maps to one of these so
// callers (and the CLI exit-code logic) can tell configuration mistakes apart
// from runtime aborts.

// Mismatched tensor dimensions.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid scalar parameter (negative rate, zero temperature, ...).
struct ParamError : std::invalid_argument {
    explicit ParamError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Inconsistent configuration (widths that do not line up, unknown task, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violation of the freeze policy (touching parameters that must stay frozen).
struct PolicyError : std::runtime_error {
    explicit PolicyError(const std::string& msg) : std::runtime_error(msg) {}
};

// Object used in a state it does not support (double merge, stale cache, ...).
struct StateError : std::runtime_error {
    explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Sequence exceeds a configured capacity.
struct CapacityError : std::runtime_error {
    explicit CapacityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller broke an API contract (non-scalar backward, prefix mismatch, ...).
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Input is degenerate for the requested operation (all-false mask, ...).
struct DegenerateInputError : std::runtime_error {
    explicit DegenerateInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training run aborted (NaN loss). Carries a diagnostic snapshot.
struct TrainAbort : std::runtime_error {
    explicit TrainAbort(const std::string& msg, std::string snapshot_json = "")
        : std::runtime_error(msg), snapshot(std::move(snapshot_json)) {}
    std::string snapshot;
};

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic RNG with explicit algorithms so that streams are reproducible
// across standard libraries and platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // burn-in so that nearby seeds decorrelate
        splitmix64(state_);
        splitmix64(state_);
    }

    uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // inclusive range
    int uniform_int(int lo, int hi) {
        if (hi < lo) throw ParamError("uniform_int: hi < lo");
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    // standard normal via Box-Muller (explicit, stdlib-independent)
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    // independent child stream
    Rng fork(uint64_t stream) const {
        uint64_t s = state_ ^ (0xd1b54a32d192ed03ull * (stream + 1));
        return Rng(s);
    }

private:
    uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace avsr
