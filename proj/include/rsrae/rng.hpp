#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace rsrae {

// Seedable generator with a fully specified output sequence: std::mt19937_64
// for raw bits, then fixed transforms (53-bit uniforms, Box-Muller normals) so
// draws do not depend on the standard library's distribution classes.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Uniform integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n);

    // Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Derives an independent stream seed from a base seed and a stream tag (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace rsrae
