// Deterministic RNG for simulation trials.
//
// Core generator: xoshiro256** (Blackman & Vigna), state expanded from a
// 64-bit key with SplitMix64. Sub-streams are keyed by (seed, trial,
// purpose) so that trials are independent and a trial's draws do not
// depend on how many other trials ran or on thread scheduling.
//
// All variate generation (uniform, exponential, bernoulli, bounded ints)
// is implemented here rather than with <random> distributions, which are
// not reproducible across standard library implementations.

#ifndef WENSIM_RNG_HPP
#define WENSIM_RNG_HPP

#include <cstdint>
#include <cmath>

namespace wensim {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
inline std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
}
} // namespace detail

// Sub-stream purposes used by the simulator. Fixed values: part of the
// reproducibility contract, do not renumber.
enum class RngPurpose : std::uint64_t {
    Events = 0,       // event timing / category selection (async), arrivals (slotted)
    PacketChoice = 1, // uniform packet pick from a buffer
    Reception = 2,    // per-transmission receiver draws
    Generic = 3,      // tests, ad hoc sampling
};

class Rng {
public:
    explicit Rng(std::uint64_t key = 0) {
        // SplitMix64 expansion, the seeding recommended for xoshiro.
        for (auto& w : s_) w = detail::splitmix64(key);
    }

    // Independent stream for (seed, trial, purpose).
    static Rng substream(std::uint64_t seed, std::uint64_t trial, RngPurpose purpose) {
        std::uint64_t x = seed;
        std::uint64_t a = detail::splitmix64(x);
        x = a ^ (0x9E3779B97F4A7C15ULL * (trial + 1));
        std::uint64_t b = detail::splitmix64(x);
        x = b ^ (0xD1B54A32D192ED03ULL * (static_cast<std::uint64_t>(purpose) + 1));
        return Rng(detail::splitmix64(x));
    }

    std::uint64_t next_u64() {
        std::uint64_t result = detail::rotl(s_[1] * 5, 7) * 9;
        std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0,1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Exponential with the given rate (mean 1/rate).
    double exponential(double rate) {
        double u;
        do { u = uniform(); } while (u <= 0.0);
        return -std::log(u) / rate;
    }

    // Uniform integer in [0, n). Fixed-point multiply; bias < 2^-64.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

private:
    std::uint64_t s_[4];
};

} // namespace wensim

#endif // WENSIM_RNG_HPP
