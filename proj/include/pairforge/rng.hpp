#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace pairforge {

// Seeded generator with implementation-independent derived distributions.
// std::mt19937_64 output is fixed by the standard; the distributions in
// <random> are not, so bounded integers, uniforms, normals and shuffles are
// written out here to keep every run bit-reproducible across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; one value per call.
    double normal();

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Per-stage seed: splitmix64(seed ^ fnv1a64(stage)). Every stochastic stage
// draws from derive_seed(top_level_seed, "<stage name>").
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage) noexcept;

std::uint64_t fnv1a64(std::string_view text) noexcept;

}  // namespace pairforge
