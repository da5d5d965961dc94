#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace fdiag {

/// SplitMix64 step; advances `state` and returns the next output.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seed for an independent stream `stream` of a base seed. Used to give every
/// restart / link / segment its own generator so that work can be reordered or
/// run in parallel without changing results.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Portable random source: std::mt19937_64 (fully specified by the standard)
/// with hand-rolled conversions, because the std distributions are
/// implementation-defined and would make fixtures platform dependent.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform();
    /// Uniform on (0, 1].
    double uniform_open_low() { return 1.0 - uniform(); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via the Marsaglia polar method.
    double normal();
    /// Unbiased integer in [0, n).
    std::size_t index(std::size_t n);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace fdiag
