#pragma once

// Seedable randomness for the solvers and generators.
//
// Stream definition (reproducible from any language):
//   splitmix64(x): z = x + 0x9e3779b97f4a7c15;
//                  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9;
//                  z = (z ^ (z >> 27)) * 0x94d049bb133111eb;
//                  return z ^ (z >> 31)                         (all mod 2^64)
//   seeding:       s[k] = splitmix64(seed + k * 0x9e3779b97f4a7c15), k = 0..3
//   next():        xoshiro256++  (rotl(s0 + s3, 23) + s0, then the usual
//                  xoshiro256 state transition with shifts 17 and rotation 45)
//   uniform():     (next() >> 11) * 2^-53, in [0, 1)
//   gaussian():    u1 = 1 - uniform(), u2 = uniform(),
//                  sqrt(-2 ln u1) * cos(2 pi u2); two draws per variate
//   trial stream:  Prng(splitmix64(base_seed + trial))

#include "rkgs/error.hpp"
#include "rkgs/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace rkgs {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    std::uint64_t z = x + kGoldenGamma;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256++ seeded by splitmix64 expansion of a 64-bit seed.
class Prng {
public:
    using result_type = std::uint64_t;

    explicit Prng(std::uint64_t seed = 0) noexcept : seed_(seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) {
            s = splitmix64(x);
            x += kGoldenGamma;
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept { return next(); }

    result_type next() noexcept {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_;
    std::uint64_t state_[4]{};
};

/// Standard normal via Box-Muller. Consumes exactly two uniforms per call.
inline double gaussian(Prng& rng) {
    const double u1 = 1.0 - rng.uniform(); // (0, 1]
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline Vector gaussian_vector(Prng& rng, std::size_t n) {
    Vector v(n);
    for (auto& x : v) x = gaussian(rng);
    return v;
}

inline Prng spawn_trial_rng(std::uint64_t base_seed, std::uint64_t trial) noexcept {
    return Prng(splitmix64(base_seed + trial));
}

/// Discrete distribution over indices with probability weight_i / sum(weights),
/// sampled by binary search over the cumulative weights. Zero-weight indices
/// are never drawn.
class WeightedIndex {
public:
    explicit WeightedIndex(std::span<const double> weights) {
        if (weights.empty()) throw ConfigError("WeightedIndex: no weights");
        cum_.reserve(weights.size());
        double acc = 0.0;
        for (std::size_t k = 0; k < weights.size(); ++k) {
            const double w = weights[k];
            if (!(w >= 0.0) || !std::isfinite(w)) {
                throw ConfigError("WeightedIndex: weight " + std::to_string(k) + " is negative or not finite");
            }
            acc += w;
            cum_.push_back(acc);
            if (w > 0.0) last_positive_ = k;
        }
        if (!(acc > 0.0)) throw ConfigError("WeightedIndex: all weights are zero");
    }

    [[nodiscard]] std::size_t size() const noexcept { return cum_.size(); }
    [[nodiscard]] double total() const noexcept { return cum_.back(); }
    [[nodiscard]] std::span<const double> cumulative() const noexcept { return cum_; }

    [[nodiscard]] double probability(std::size_t k) const {
        const double lo = k == 0 ? 0.0 : cum_[k - 1];
        return (cum_[k] - lo) / total();
    }

    std::size_t sample(Prng& rng) const {
        const double u = rng.uniform() * total();
        const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
        // u can round up to total(); fall back to the last index with mass.
        if (it == cum_.end()) return last_positive_;
        return static_cast<std::size_t>(it - cum_.begin());
    }

private:
    std::vector<double> cum_;
    std::size_t last_positive_ = 0;
};

/// Pr(row = i) = |X^i|^2 / |X|_F^2
inline WeightedIndex row_distribution(const DenseMatrix& X) {
    if (!(X.frob_sq() > 0.0)) throw ConfigError("row_distribution: matrix is zero");
    return WeightedIndex(X.row_norms_sq());
}

/// Pr(column = j) = |X_(j)|^2 / |X|_F^2
inline WeightedIndex col_distribution(const DenseMatrix& X) {
    if (!(X.frob_sq() > 0.0)) throw ConfigError("col_distribution: matrix is zero");
    return WeightedIndex(X.col_norms_sq());
}

} // namespace rkgs
