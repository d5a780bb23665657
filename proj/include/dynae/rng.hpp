#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dynae {

/// Seeded 64-bit Mersenne Twister with distribution helpers that do not depend on
/// the standard library's implementation-defined distributions, so streams are
/// reproducible across toolchains. State round-trips through text for checkpoints.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);
    /// Uniform integer in [lo, hi].
    std::int64_t between(std::int64_t lo, std::int64_t hi);

    /// Standard normal via Box-Muller.
    double normal();

    std::vector<std::size_t> permutation(std::size_t n);

    /// Independent child stream derived from this one.
    Rng split() { return Rng(engine_() ^ 0x9E3779B97F4A7C15ULL); }

    std::string state() const;
    void restore(const std::string& state);

private:
    std::mt19937_64 engine_;
};

}  // namespace dynae
