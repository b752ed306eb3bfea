#pragma once

#include <cmath>
#include <cstdint>

#include "saratrx/common.hpp"

namespace saratrx {

// Counter-based generator (splitmix64 over a keyed counter). Streams derived
// from (seed, index) are independent, so parallel and serial sample order
// produce identical values regardless of worker count.
class Rng {
   public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    static Rng for_index(std::uint64_t seed, std::uint64_t index) {
        return Rng(mix(seed ^ mix(index + 0x9e3779b97f4a7c15ull)));
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    // Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Modulo bias is negligible for n << 2^64.
        return next_u64() % n;
    }

    double normal() {
        // Box-Muller; one value per call keeps the stream layout simple.
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Gamma(shape=looks, scale=1/looks): unit mean, variance 1/looks.
    // Integer shape lets us use the exact sum-of-exponentials construction,
    // which is fully deterministic across platforms.
    double gamma_unit_mean(int looks) {
        if (looks < 1) throw ValidationError("gamma_unit_mean: looks < 1");
        double acc = 0.0;
        for (int i = 0; i < looks; ++i) {
            double u = uniform();
            if (u <= 0.0) u = 0x1.0p-53;
            acc += -std::log(u);
        }
        return acc / double(looks);
    }

   private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
};

}  // namespace saratrx
