#pragma once

// SplitMix64: a counter-based 64-bit generator (Weyl sequence + finalizer).
// The distributions below are written out by hand so that a seed gives the
// same stream with every standard library.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace abo {

class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : counter_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (counter_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // [0, 1) with 53 random bits
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; the second variate of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

  private:
    std::uint64_t counter_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Independent child seed for stream `stream` of a run seeded with `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 mix(seed ^ (stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    mix.next();
    return mix.next();
}

}  // namespace abo
