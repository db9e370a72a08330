#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace pocf {

/// Deterministic random source. Normal sampling is done with an explicit
/// Box-Muller transform instead of std::normal_distribution so that the
/// produced stream is identical across standard-library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform in [0, 1) with 53 bits of entropy.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (both values of each pair are used).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    /// Normal with stddev sigma, resampled until within 2 sigma.
    double truncated_normal(double sigma) {
        double z = normal();
        while (std::abs(z) > 2.0) z = normal();
        return sigma * z;
    }

    /// Integer in [0, n). Modulo bias is irrelevant at the sizes used here.
    std::uint64_t below(std::uint64_t n) { return eng_() % n; }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Fisher-Yates shuffle driven by Rng::below. std::shuffle is not used
/// because its draw pattern is implementation-defined.
template <class T>
void deterministic_shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace pocf
