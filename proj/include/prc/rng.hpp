#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace prc {

// splitmix64 finalizer; used to decorrelate derived seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d4ecb9aa9368b3ULL;
    return z ^ (z >> 31);
}

// Deterministic substream derivation: (seed, salt, index) -> engine seed.
// Each Monte Carlo sample gets its own engine so results do not depend on
// worker count or iteration order.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t salt, std::uint64_t index) {
    return mix64(mix64(seed ^ mix64(salt)) ^ index);
}

using RngEngine = std::mt19937_64;

inline RngEngine substream_engine(std::uint64_t seed, std::uint64_t salt, std::uint64_t index) {
    return RngEngine(substream_seed(seed, salt, index));
}

inline Eigen::VectorXd standard_normal_vector(Eigen::Index n, RngEngine& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
    return z;
}

// Salts for the independent sampling stages of a run. Values are arbitrary
// but fixed; stages must never share a substream.
namespace stream_salt {
inline constexpr std::uint64_t kScenario = 0x5343454e41524953ULL;
inline constexpr std::uint64_t kValidation = 0x56414c4944415445ULL;
inline constexpr std::uint64_t kEvaluation = 0x4556414c55415445ULL;
inline constexpr std::uint64_t kLawGeneration = 0x4c41574d414b4552ULL;
inline constexpr std::uint64_t kRollout = 0x524f4c4c4f555453ULL;
inline constexpr std::uint64_t kExperimentCell = 0x45585043454c4c53ULL;
inline constexpr std::uint64_t kBoxScenario = 0x424f585343454e45ULL;
}  // namespace stream_salt

}  // namespace prc
