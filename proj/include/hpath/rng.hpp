#pragma once

#include <cmath>
#include <cstdint>

// Counter-derived xoshiro256++ streams.
//
// Every stream is a pure function of (master seed, path index, purpose), so
// estimates are reproducible bit-for-bit regardless of worker count or
// scheduling. Gaussians come from Box-Muller on explicitly constructed
// uniforms; no implementation-defined std::normal_distribution.

namespace hpath::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer; also used as the seed-derivation mixer.
inline std::uint64_t mix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream purposes keep sub-experiments decorrelated under one master seed.
enum class Purpose : std::uint64_t {
    Path = 1,        // Brownian increments of a primary path
    InnerPath = 2,   // nested Monte Carlo restart paths
    Centering = 3,   // independent batch for centering constants (e.g. E[sup d])
    Probe = 4,       // random covectors/vectors for geometry property checks
};

class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t path_index, Purpose purpose,
           std::uint64_t subkey = 0) {
        std::uint64_t x = mix64(seed);
        x = mix64(x ^ (kGolden * (path_index + 1)));
        x = mix64(x ^ (0xbf58476d1ce4e5b9ULL * (static_cast<std::uint64_t>(purpose) + 1)));
        x = mix64(x ^ (0x94d049bb133111ebULL * (subkey + 1)));
        for (auto& w : state_) {
            x += kGolden;
            w = mix64(x);
        }
        has_spare_ = false;
        spare_ = 0.0;
    }

    std::uint64_t next_u64() {
        auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform in (0, 1]; never 0 so log() below is safe
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    // standard normal via Box-Muller, one spare cached
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_[4];
    bool has_spare_;
    double spare_;
};

} // namespace hpath::rng
