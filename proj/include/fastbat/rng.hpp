#pragma once

#include <cstdint>
#include <string_view>

namespace fastbat {

// Deterministic splittable RNG. All randomness in the toolkit flows through
// named streams derived from a single root seed, so fixed-seed runs are
// bit-reproducible regardless of evaluation order. Uniform doubles are built
// from the raw 64-bit output directly (no std::uniform_real_distribution,
// whose stream is implementation-defined).
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(splitmix(seed ^ 0x9e3779b97f4a7c15ull)) {}

    // Child stream for (label, index); independent of draws from the parent.
    Rng stream(std::string_view label, uint64_t index = 0) const;

    uint64_t next_u64();
    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }
    // Fair coin.
    bool next_bool() { return (next_u64() & 1ull) != 0; }
    // Standard normal (Box-Muller on two uniform draws).
    double next_gauss();

  private:
    static uint64_t splitmix(uint64_t x);
    uint64_t state_;
    bool have_gauss_ = false;
    double cached_gauss_ = 0.0;
};

} // namespace fastbat
