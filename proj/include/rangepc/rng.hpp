#pragma once

#include <cstdint>

#include "rangepc/common.hpp"

namespace rangepc {

// SplitMix64 finalizer. Stateless 64-bit mixer, also used as the keyed hash
// behind the edge environment and for deriving replica streams.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Fold a value into a running hash key.
inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return mix64(h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
}

// Counter-based generator: output i of stream s is mix64(s + i*gamma).
// Cheap to fork, trivially reproducible, no warm-up.
class Rng {
  public:
    explicit Rng(std::uint64_t stream_key) : state_(mix64(stream_key)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1) with 53 random bits.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n), unbiased (rejection on the top band).
    std::uint64_t below(std::uint64_t n) {
        require(n > 0, "Rng::below: n must be positive");
        std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        for (;;) {
            std::uint64_t v = next_u64();
            if (v < limit) return v % n;
        }
    }

    bool bernoulli(double p) { return next_unit() < p; }

    // Exact Binomial(n, p) by CDF inversion; O(mean) expected work for the
    // small means used here. Handles the degenerate ends exactly.
    std::int64_t binomial(std::int64_t n, double p) {
        require(n >= 0 && p >= 0.0 && p <= 1.0, "Rng::binomial: bad arguments");
        if (n == 0 || p == 0.0) return 0;
        if (p == 1.0) return n;
        if (p > 0.5) return n - binomial(n, 1.0 - p);
        double u = next_unit();
        double q = 1.0 - p;
        double pmf = std::pow(q, static_cast<double>(n));
        double ratio = p / q;
        double cdf = pmf;
        std::int64_t k = 0;
        while (u >= cdf && k < n) {
            pmf *= ratio * static_cast<double>(n - k) / static_cast<double>(k + 1);
            ++k;
            cdf += pmf;
        }
        return k;
    }

  private:
    std::uint64_t state_;
};

// Stream derivation: hash(seed, parts...). Replica i of an experiment uses
// derive_stream(seed, subsystem_tag, i) so results never depend on thread
// scheduling.
inline std::uint64_t derive_stream(std::uint64_t seed) { return mix64(seed); }

template <typename... Rest>
std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t v, Rest... rest) {
    return derive_stream(hash_combine(seed, v), rest...);
}

}  // namespace rangepc
