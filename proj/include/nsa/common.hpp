#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace nsa {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// Error taxonomy. Every failure the library reports is one of these.
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct TrainingDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An unsafe state was visited. Under NSA this is a bug, never an expected outcome.
struct SafetyViolation : std::logic_error {
    using std::logic_error::logic_error;
};

struct GenerationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoRecoverableAction : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Named sub-stream of a master seed: `substream(seed, "eval")` is stable across
/// runs and independent of every other name.
inline Rng substream(std::uint64_t master, std::string_view name, std::uint64_t index = 0) {
    return Rng(splitmix64(splitmix64(master ^ fnv1a(name)) + index));
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace nsa
