#pragma once

#include <cstdint>
#include <random>

namespace cpd {

// SplitMix64 finalizer. Used to derive statistically independent seeds for
// substreams from a (root seed, index) pair.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t substream_seed(std::uint64_t root, std::uint64_t index) noexcept {
    return mix64(mix64(root) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t substream_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b) noexcept {
    return substream_seed(substream_seed(root, a), b);
}

using Engine = std::mt19937_64;

// One RNG per replication stream; owns the engine and the cached normal
// variate so draws are reproducible from the seed alone.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    bool bernoulli(double p) { return uniform_(engine_) < p; }

    Engine& engine() noexcept { return engine_; }

private:
    Engine engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace cpd
