#ifndef JOP_RNG_HPP
#define JOP_RNG_HPP

#include <cstdint>
#include <vector>

namespace jop {

// splitmix64 (Steele, Lea, Flood 2014). Every random decision in the
// project flows through this generator so that fold plans, weight
// initialisation and synthetic fixtures are reproducible across
// implementations and across --jobs settings.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Unbiased-enough bounded draw via 128-bit multiply-shift (Lemire).
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// Derives an independent stream from (seed, stream). Used to hand each
// cross-validation fold or worker its own generator deterministically.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 g(seed ^ (0xA0761D6478BD642FULL + stream * 0xE7037ED1A0B428DBULL));
    return g.next_u64();
}

} // namespace jop

#endif
