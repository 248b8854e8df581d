#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "dsmap/tensor.hpp"

namespace dsmap {

/// Deterministic random source.
///
/// Wraps std::mt19937_64 but generates uniforms and normals itself
/// (53-bit uniform, Box-Muller) so that streams are identical on every
/// standard library. Every stochastic component takes an explicit Rng or
/// a seed; nothing reads global state.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    /// Uniform double in [0, 1).
    double uniform();
    double uniform(double lo, double hi);
    /// Standard normal via Box-Muller.
    double normal();
    double normal(double mean, double stddev);
    /// Uniform integer in [0, n), n >= 1.
    int64_t uniform_int(int64_t n);

    void fill_normal(Tensor& t, double mean = 0.0, double stddev = 1.0);

    /// Independent generator for a named substream of this seed.
    Rng fork(std::string_view label, uint64_t index = 0) const;

    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Stable 64-bit mix of a seed, a label and an index; the basis of all
/// substream derivation (per-step data order, style draws, repeats).
uint64_t mix_seed(uint64_t seed, std::string_view label, uint64_t index);

}  // namespace dsmap
