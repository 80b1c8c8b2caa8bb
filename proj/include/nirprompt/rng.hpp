#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace nirprompt {

// Deterministic RNG wrapper. std::uniform_* distributions are
// implementation-defined, so all draws funnel through hand-rolled
// transforms of mt19937_64 output; identical seeds give identical
// streams on every platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, n). Modulo bias is < 2^-50 for the sizes used here.
    size_t uniform_index(size_t n) { return static_cast<size_t>(next_u64() % n); }

    // Uniform double in [0, 1) with 53 bits of entropy.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller (deterministic, no cached spare).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        if (items.size() < 2) return;
        for (size_t i = items.size() - 1; i > 0; --i) {
            size_t j = uniform_index(i + 1);
            std::swap(items[i], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace nirprompt
