#pragma once

#include "chatty/matrix.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace chatty {

/// Deterministic random source. The engine is std::mt19937_64 (bit-exact by
/// the standard); the distributions are hand-rolled because the standard
/// leaves std::normal_distribution and std::shuffle implementation-defined,
/// and experiment outputs must be byte-identical given a seed.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    Real uniform() { return static_cast<Real>(next_u64() >> 11) * 0x1.0p-53; }

    Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller, spare value cached.
    Real normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        Real u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const Real u2 = uniform();
        const Real r = std::sqrt(-2.0 * std::log(u1));
        const Real theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    Real normal(Real mean, Real stddev) { return mean + stddev * normal(); }

    /// Unbiased integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = 0;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    /// Fisher-Yates.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_int(i)]);
        }
    }

  private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    Real spare_ = 0.0;
};

}  // namespace chatty
