#pragma once

#include <cmath>
#include <cstdint>

namespace memo {

// Counter-based splitmix64 generator. Every draw advances a 64-bit counter,
// so the full state is (seed, draws) and checkpoints can carry it as a
// two-word summary. Gaussian draws use the cosine branch of Box-Muller and
// consume exactly two uniforms; there is no cached spare.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), draws_(0) {}

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + (++draws_) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double gaussian() {
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Independent stream derived from this generator's seed.
    Rng fork(std::uint64_t stream) const {
        std::uint64_t z = seed_ ^ (0x9E3779B97F4A7C15ull + (stream << 1 | 1));
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return Rng(z ^ (z >> 31));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t draws() const { return draws_; }
    void set_draws(std::uint64_t draws) { draws_ = draws; }

private:
    std::uint64_t seed_;
    std::uint64_t draws_;
};

}  // namespace memo
