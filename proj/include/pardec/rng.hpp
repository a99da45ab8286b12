#pragma once

#include <cstdint>
#include <random>

namespace pardec {

// Explicitly seeded random source. All randomness in the library is drawn
// from an Rng passed by reference; nothing reads ambient state. split()
// derives an independent child stream so parallel work stays reproducible.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision. Implemented here rather than
    // through std::uniform_real_distribution, whose output is not specified
    // bit-for-bit across standard libraries.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t       x     = engine_();
        while (x >= limit) {
            x = engine_();
        }
        return x % n;
    }

    Rng split() { return Rng(engine_()); }

  private:
    // splitmix64 finalizer so that nearby seeds give unrelated streams.
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
};

// Fisher-Yates with Rng::below, portable across standard libraries.
template <typename Vec> void shuffle(Vec & v, Rng & rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace pardec
