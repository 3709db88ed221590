#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace geocert {

// Counter-based generator: the stream is a pure function of (seed, counter),
// so identical seeds give identical streams regardless of call history
// elsewhere. Normal variates use the Box-Muller transform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ULL * (++counter_);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t seed() const { return seed_; }

    // Independent substream, e.g. one per window or per trial.
    Rng fork(std::uint64_t stream) const {
        return Rng(seed_ ^ (0xD1342543DE82EF95ULL * (stream + 1)));
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace geocert
