#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "dnslab/bytes.hpp"

namespace dnslab {

// Deterministic, splittable RNG. All randomness in a run flows from one
// scenario seed through named child streams, so that a (scenario, seed) pair
// fully determines every draw regardless of platform or standard library.
// Core generator is splitmix64-seeded xoshiro256**; distributions are
// implemented here rather than with <random> because libstdc++/libc++ do not
// agree on distribution outputs.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& w : s_) w = splitmix64(x);
    }

    // Child stream derived from this stream's seed material and a label.
    Rng split(const std::string& label) const {
        uint64_t h = fnv1a64(label);
        return Rng(s_[0] ^ (h * 0x9e3779b97f4a7c15ull) ^ (s_[2] + h));
    }

    uint64_t next_u64() {
        uint64_t result = rotl(s_[1] * 5, 7) * 9;
        uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform integer in [0, bound), bound >= 1. Rejection sampling keeps it unbiased.
    uint64_t uniform(uint64_t bound) {
        uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    uint32_t uniform_u32(uint32_t bound) { return static_cast<uint32_t>(uniform(bound)); }
    uint16_t uniform_u16() { return static_cast<uint16_t>(next_u64() & 0xffff); }

    // Uniform in [lo, hi] inclusive.
    uint32_t uniform_range(uint32_t lo, uint32_t hi) {
        return lo + uniform_u32(hi - lo + 1);
    }

    double uniform01() {  // [0, 1), 53-bit resolution
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    double normal(double mean, double sigma) {
        // Box-Muller; one draw per call keeps the stream accounting simple.
        double u1 = uniform01(), u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
        return mean + sigma * z;
    }

    double exponential(double rate) {
        double u = uniform01();
        while (u <= 0.0) u = uniform01();
        return -std::log(u) / rate;
    }

    // Knuth's product method; fine for the rates used here (mu up to a few
    // thousand). Falls back to a rounded normal above that.
    uint64_t poisson(double mu) {
        if (mu <= 0.0) return 0;
        if (mu > 4000.0) {
            double v = normal(mu, std::sqrt(mu));
            return v <= 0.0 ? 0 : static_cast<uint64_t>(v + 0.5);
        }
        // Split large mu to avoid exp() underflow in the product loop.
        uint64_t n = 0;
        double rem = mu;
        while (rem > 500.0) {
            n += poisson_knuth(500.0);
            rem -= 500.0;
        }
        return n + poisson_knuth(rem);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {  // Fisher-Yates
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = uniform(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t poisson_knuth(double mu) {
        double limit = std::exp(-mu);
        double prod = uniform01();
        uint64_t n = 0;
        while (prod > limit) {
            ++n;
            prod *= uniform01();
        }
        return n;
    }

    static uint64_t splitmix64(uint64_t& x) {
        uint64_t z = (x += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4];
};

} // namespace dnslab
