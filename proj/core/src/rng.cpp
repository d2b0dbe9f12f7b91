#include "kinlim/rng.hpp"

#include <cmath>

namespace kinlim {

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
    return mix64(seed ^ (mix64(value) + 0x9E3779B97F4A7C15ULL + (seed << 6) + (seed >> 2)));
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return hash_combine(mix64(master), index);
}

namespace {

// Marsaglia polar method; explicit so streams are identical across standard libraries.
template <class G>
double polar_normal(G& g) {
    for (;;) {
        const double u = 2.0 * uniform01(g) - 1.0;
        const double v = 2.0 * uniform01(g) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

template <class G>
Vec ball_sample(int d, G& g) {
    Vec x(d);
    if (d <= 3) {
        for (;;) {
            for (int i = 0; i < d; ++i) x(i) = 2.0 * uniform01(g) - 1.0;
            if (x.squaredNorm() < 1.0) return x;
        }
    }
    for (int i = 0; i < d; ++i) x(i) = polar_normal(g);
    x /= x.norm();
    return x * std::pow(uniform01(g), 1.0 / d);
}

}  // namespace

double standard_normal(Rng& rng) { return polar_normal(rng); }
double standard_normal(SplitMix64& rng) { return polar_normal(rng); }

Vec random_unit_vector(int d, Rng& rng) {
    if (d == 2) {
        const double phi = 2.0 * kPi * uniform01(rng);
        return make_vec({std::cos(phi), std::sin(phi)});
    }
    if (d == 3) {
        const double z = 2.0 * uniform01(rng) - 1.0;
        const double phi = 2.0 * kPi * uniform01(rng);
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        return make_vec({rho * std::cos(phi), rho * std::sin(phi), z});
    }
    Vec x(d);
    for (int i = 0; i < d; ++i) x(i) = polar_normal(rng);
    return x / x.norm();
}

Vec random_in_ball(int d, Rng& rng) { return ball_sample(d, rng); }
Vec random_in_ball(int d, SplitMix64& rng) { return ball_sample(d, rng); }

}  // namespace kinlim
