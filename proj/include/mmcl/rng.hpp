#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace mmcl {

/// Deterministic random source. The engine is std::mt19937_64 (bit-exact by
/// the standard); the uniform/normal transforms are implemented here instead
/// of using std::*_distribution, whose output is implementation-defined and
/// would break cross-toolchain reproducibility of generated datasets.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Child stream with a seed derived from (seed, tag). Forked streams are
    /// statistically independent and insensitive to draw counts elsewhere.
    Rng fork(std::uint64_t tag) const { return Rng(mix(seed_, tag)); }

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Rejection-sampled, no modulo bias.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(
                        uniform_index(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    /// Standard normal via Box-Muller; the second value is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    void fill_normal(double* out, std::size_t n, double mean = 0.0,
                     double std = 1.0) {
        for (std::size_t i = 0; i < n; ++i) out[i] = mean + std * normal();
    }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    /// State serialization for resumable checkpoints. The cached normal is
    /// stored as raw bits so the round trip is exact.
    std::string save_state() const {
        std::ostringstream os;
        os << seed_ << ' ' << (have_spare_ ? 1 : 0) << ' '
           << std::bit_cast<std::uint64_t>(spare_) << ' ' << eng_;
        return os.str();
    }
    void load_state(const std::string& s) {
        std::istringstream is(s);
        int have = 0;
        std::uint64_t spare_bits = 0;
        is >> seed_ >> have >> spare_bits >> eng_;
        spare_ = std::bit_cast<double>(spare_bits);
        have_spare_ = (have != 0);
    }

private:
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        // splitmix64 finalizer over the combined words
        std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mmcl
