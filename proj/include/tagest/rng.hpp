#pragma once

// Deterministic random number generation for simulations.
//
// Standard-library distributions are not bit-stable across implementations,
// so traces built on them would not reproduce between toolchains. Everything
// here is fully specified arithmetic: splitmix64 for seed derivation,
// xoshiro256** for the stream, Lemire rejection for bounded integers,
// Box-Muller for normals.

#include <cmath>
#include <cstdint>

namespace tagest {

// splitmix64 finalizer. Bijective and well mixed; safe for seed material.
inline constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Child seed for (master, stream, index). Each (seed index, frame) pair gets
// its own generator, so frames reproduce in isolation and results do not
// depend on the order seeds are run in.
inline constexpr std::uint64_t derive_seed(std::uint64_t master,
                                           std::uint64_t stream,
                                           std::uint64_t index) noexcept {
    std::uint64_t s = mix64(master);
    s = mix64(s ^ mix64(stream));
    s = mix64(s ^ mix64(index));
    return s;
}

// xoshiro256** 1.0 with cached-spare Box-Muller normals.
class Xoshiro {
  public:
    explicit Xoshiro(std::uint64_t seed) noexcept {
        // Seed expansion per the reference implementation: four splitmix64
        // outputs. The all-zero state is unreachable this way.
        std::uint64_t sm = seed;
        for (auto& w : state_) {
            sm += 0x9E3779B97F4A7C15ull;
            std::uint64_t z = sm;
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
            w = z ^ (z >> 31);
        }
    }

    std::uint64_t next() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform integer in [0, bound). Lemire multiply-shift with rejection;
    // unbiased for any bound >= 1.
    std::uint64_t uniform_below(std::uint64_t bound) noexcept {
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t cutoff = (0 - bound) % bound;
            while (lo < cutoff) {
                m = static_cast<unsigned __int128>(next()) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Uniform double in [0, 1), 53-bit resolution.
    double uniform01() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the paired draw is cached.
    double normal() noexcept {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] keeps the log finite.
        const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) noexcept {
        return mean + stddev * normal();
    }

  private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4]{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Stream tags for derive_seed. Arbitrary distinct constants.
inline constexpr std::uint64_t stream_run = 0x52554e00ull;
inline constexpr std::uint64_t stream_frame = 0x4652414dull;
inline constexpr std::uint64_t stream_schedule = 0x53434845ull;

}  // namespace tagest
