#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ordgrade {

/// Deterministic random source. Wraps std::mt19937_64 (whose output stream
/// is fixed by the standard) and draws bounded integers and doubles without
/// std::*_distribution, which is implementation-defined. Every run of the
/// project that needs randomness goes through this class so results are
/// reproducible across compilers and platforms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(mix(seed)), seed_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t bounded(std::uint64_t n) {
        // Debiased modulo: reject the final partial range.
        const std::uint64_t threshold = -n % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via Box-Muller (the cosine branch only).
    double next_gaussian() {
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Derives an independent substream from this generator's seed and a
    /// stream index. Forking is counter-based: fork(k) of the same parent
    /// always yields the same stream, whatever was drawn in between.
    Rng fork(std::uint64_t stream) const { return Rng(seed_ ^ mix(stream + 0x9e3779b97f4a7c15ull)); }

  private:
    // splitmix64 finalizer; decorrelates adjacent integer seeds.
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
    std::uint64_t seed_ = 0;
};

}  // namespace ordgrade
