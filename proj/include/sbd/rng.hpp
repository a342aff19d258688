#pragma once
// Seeded randomness with portable sampling.
//
// std::uniform_*_distribution output is implementation-defined, so every
// draw that reaches a file goes through the helpers below (mt19937_64 is
// bit-stable across standard libraries, the distributions are not).

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>

namespace sbd {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derive a stream seed from a base seed, a component tag and an index.
/// All randomness in the pipeline flows from one base seed through this.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t index = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tag
    for (unsigned char ch : tag) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return mix64(base ^ mix64(h ^ mix64(index)));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t draw;
        do {
            draw = engine_();
        } while (draw >= limit);
        return draw % n;
    }

    /// Double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Index drawn proportionally to non-negative weights (CDF scan).
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (total <= 0.0)
            throw std::invalid_argument("Rng::categorical: weights sum to zero");
        const double u = unit() * total;
        double cum = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            cum += weights[i];
            if (u < cum) return i;
        }
        return weights.size() - 1;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace sbd
