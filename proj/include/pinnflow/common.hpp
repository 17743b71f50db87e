#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pinnflow {

/// Bad user input: config files, CLI values, malformed data files.
/// The CLI maps this (and std::invalid_argument) to exit code 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure (non-finite loss or gradient). Mapped to exit code 2.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Deterministic RNG used everywhere a random draw is needed.
///
/// One instance is seeded from the run seed and consumed in a documented
/// order: (1) network weight init, (2) test split plus the one-time test
/// parameter sample, then per training epoch (3) per-point parameter samples
/// (volume, Dirichlet, Neumann, moving) and (4) batch shuffles, volume set
/// first, then Dirichlet, then Neumann. Uniform doubles and the shuffle are
/// hand-rolled on top of the raw 64-bit stream so results do not depend on
/// the standard library's distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    /// Raw 64-bit draw (splitmix64).
    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n), n > 0. Rejection-free bounded draw.
    std::uint64_t below(std::uint64_t n) {
        // Lemire's multiply-shift with rejection on the biased strip.
        for (;;) {
            std::uint64_t x = next_u64();
            __uint128_t m = static_cast<__uint128_t>(x) * n;
            auto lo = static_cast<std::uint64_t>(m);
            if (lo >= n || lo >= (-n) % n) return static_cast<std::uint64_t>(m >> 64);
        }
    }

    /// Fisher-Yates shuffle of an index vector.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::uint64_t state_;
};

} // namespace pinnflow
