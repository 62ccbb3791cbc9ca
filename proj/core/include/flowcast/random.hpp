#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace flowcast {

/// Seeded generator used for every stochastic step (init, minibatches, sampling).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Uniform on (0, 1]; never returns 0 so it is safe under log.
    double uniform_open() {
        return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    }
    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(engine_() >> 11) * 0x1.0p-53);
    }
    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    /// Independent child stream, deterministic in the parent state.
    Rng split() { return Rng(engine_()); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace flowcast
