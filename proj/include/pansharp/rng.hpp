#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace pansharp {

// Deterministic PRNG with hand-rolled distributions. std::normal_distribution
// and friends are implementation-defined, which would break the byte-identical
// reproducibility contract across toolchains, so we do not use them.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    // splitmix64 step
    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller, no caching so the draw sequence is position-independent.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // index in [0, n)
    std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

private:
    std::uint64_t state_;
};

// Stable per-item substream seed, so generating sample i does not depend on
// how many draws earlier samples consumed.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    Rng mix(seed ^ (0xd1b54a32d192ed03ull * (index + 1)));
    return mix.next_u64();
}

} // namespace pansharp
