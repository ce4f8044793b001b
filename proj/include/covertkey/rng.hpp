#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "covertkey/errors.hpp"

namespace covertkey {

// splitmix64 step; used both to condition raw seeds and to derive substream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d4a2ca9f1d8415ULL;
    return z ^ (z >> 31);
}

// Deterministic RNG: a seeded mt19937_64 plus helpers whose outputs depend only on
// the seed and call sequence (uniform doubles are built from raw bits, categorical
// sampling uses explicit inverse-CDF walks), so identical seeds reproduce identical
// streams on any platform with the same binary.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t s = seed;
        gen_.seed(splitmix64(s));
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, n).
    std::int64_t uniform_int(std::int64_t n) {
        if (n <= 0) throw DomainError("uniform_int: n must be positive");
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t un = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return static_cast<std::int64_t>(x % un);
    }

    // Inverse-CDF draw from an unnormalized nonnegative weight vector.
    int categorical(const Eigen::VectorXd& w) {
        const double total = w.sum();
        if (!(total > 0.0)) throw DomainError("categorical: weights must have positive sum");
        double u = uniform() * total;
        for (int i = 0; i < w.size(); ++i) {
            u -= w[i];
            if (u < 0.0) return i;
        }
        return static_cast<int>(w.size()) - 1; // guard against accumulated round-off
    }

    std::int64_t binomial(std::int64_t n, double p) {
        std::binomial_distribution<std::int64_t> d(n, p);
        return d(gen_);
    }

    // Independent substream: deterministic function of (seed, stream index).
    Rng derive(std::uint64_t stream) const {
        std::uint64_t s = seed_ ^ (0xa0761d6478bd642fULL + stream * 0xe7037ed1a0b428dbULL);
        return Rng(splitmix64(s));
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace covertkey
