#pragma once

#include "splatprune/types.hpp"

#include <random>

namespace splat {

/// Deterministic random source. Draws are derived from raw mt19937_64 output
/// with fixed arithmetic instead of std distributions, so sequences are
/// identical across standard-library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection sampling over the largest multiple of n below 2^64.
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x > limit);
        return x % n;
    }

    Vec3 uniform_vec3(double lo, double hi) {
        return Vec3(uniform(lo, hi), uniform(lo, hi), uniform(lo, hi));
    }

    /// Uniformly distributed unit quaternion (w, x, y, z), Shoemake's method.
    Vec4 unit_quaternion() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double u3 = uniform();
        const double a = std::sqrt(1.0 - u1);
        const double b = std::sqrt(u1);
        constexpr double two_pi = 6.283185307179586476925286766559;
        return Vec4(b * std::cos(two_pi * u3), a * std::sin(two_pi * u2),
                    a * std::cos(two_pi * u2), b * std::sin(two_pi * u3));
    }

    /// Uniform point on the unit sphere.
    Vec3 unit_vec3() {
        const double z = uniform(-1.0, 1.0);
        const double phi = uniform(0.0, 6.283185307179586476925286766559);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return Vec3(r * std::cos(phi), r * std::sin(phi), z);
    }

    template <typename T>
    void shuffle(std::vector<T>& values) {
        if (values.size() < 2) {
            return;
        }
        for (std::size_t i = values.size() - 1; i > 0; --i) {
            std::swap(values[i], values[uniform_index(i + 1)]);
        }
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

} // namespace splat
