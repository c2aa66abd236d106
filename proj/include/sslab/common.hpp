// Shared error types and deterministic RNG helpers.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace sslab {

// Invalid user-supplied argument (out-of-range ratio, bad k, ...).
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A caller broke an API contract (rect out of bounds, cache mismatch, ...).
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

// Numeric input outside the mathematical domain (zero-norm vector, ...).
struct NumericDomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Dataset file could not be parsed.
struct IngestionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic generator. std::mt19937_64 engine output is fully specified
// by the standard; the distribution helpers below are hand-rolled because
// std::uniform_*_distribution results vary between standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        if (hi <= lo) return lo;
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(eng_() % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::mt19937_64& engine() { return eng_; }
    const std::mt19937_64& engine() const { return eng_; }

private:
    std::mt19937_64 eng_;
};

// SplitMix64 finalizer; used to derive independent per-sample seeds.
inline std::uint64_t mix_u64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// hash(seed, epoch, index) — schedule-independent per-sample seed derivation.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return mix_u64(mix_u64(seed ^ mix_u64(a)) ^ mix_u64(b ^ 0x5bf03635ULL));
}

}  // namespace sslab
