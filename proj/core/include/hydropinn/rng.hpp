/// @file rng.hpp
/// @brief Seeded random source with hand-rolled variate transforms.
///
/// The engine is std::mt19937_64 (fully specified by the standard); the
/// normal and gamma transforms are implemented here rather than with
/// std:: distributions, whose output sequences are implementation-defined.
/// Identical seeds therefore give bit-identical streams on any toolchain.

#pragma once

#include <cstdint>
#include <random>

namespace hydropinn {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    /// Standard normal via Box-Muller (pairs cached).
    double normal();

    /// Gamma(shape, 1) for shape >= 1, Marsaglia-Tsang squeeze method.
    double gamma(double shape);

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return eng_() % n;
    }

    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
    bool has_spare_{false};
    double spare_{0.0};
};

/// Fisher-Yates shuffle driven by this module's Rng (std::shuffle leaves the
/// draw pattern unspecified).
template <typename T>
void shuffle(std::vector<T>& xs, Rng& rng) {
    for (std::size_t i = xs.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(xs[i - 1], xs[j]);
    }
}

}  // namespace hydropinn
