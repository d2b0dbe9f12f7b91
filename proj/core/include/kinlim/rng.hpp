#pragma once

#include "kinlim/types.hpp"

#include <cstdint>
#include <random>

namespace kinlim {

using Rng = std::mt19937_64;

// SplitMix64; used for hashed per-cell and per-scatterer streams.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);

// Seed for the index-th independent task under a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Uniform double in [0,1) with 53 random bits.
template <class G>
double uniform01(G& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

template <class G>
double uniform(G& gen, double a, double b) {
    return a + (b - a) * uniform01(gen);
}

double standard_normal(Rng& rng);
double standard_normal(SplitMix64& rng);

// Uniform on the unit sphere S^{d-1}.
Vec random_unit_vector(int d, Rng& rng);
// Uniform in the unit ball B^d.
Vec random_in_ball(int d, Rng& rng);
Vec random_in_ball(int d, SplitMix64& rng);

}  // namespace kinlim
