#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ddar/matrix.hpp"

namespace ddar {

// Seeded PRNG used everywhere randomness is needed.
//
// The integer stream comes from std::mt19937_64, whose output sequence is
// fully specified by the C++ standard and therefore identical across
// platforms. Doubles are built from the raw 64-bit stream (53-bit mantissa)
// and Gaussians via Box-Muller, so the float streams are reproducible too.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1): top 53 bits of the integer stream.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

    // Standard normal via Box-Muller; one cached value per pair.
    double next_gaussian();

    // Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

    Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0);

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace ddar
