#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace egopack {

// Deterministic RNG. mt19937_64 output is fixed by the standard; the
// uniform/normal transforms are implemented here instead of using
// std distributions, whose algorithms vary between standard libraries.
class Rng {
   public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of randomness.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller (no cached spare, one value per call).
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Uniform integer in [0, n). Modulo bias is negligible for the small n
    // used here and keeps the draw count fixed.
    uint64_t bounded(uint64_t n) { return n == 0 ? 0 : gen_() % n; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

   private:
    std::mt19937_64 gen_;
};

}  // namespace egopack
