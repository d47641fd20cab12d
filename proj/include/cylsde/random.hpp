#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace cylsde {

// seed mixer, also used to derive child stream keys
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Counter-keyed xoshiro256++ stream.
///
/// Streams form a tree: derive(a, b) yields a child whose state depends only
/// on the root key and the derivation path, never on how much the parent has
/// been consumed. Monte Carlo code derives one stream per (path, coordinate,
/// purpose) so results do not depend on scheduling.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : key_(seed) {
        std::uint64_t s = splitmix64(seed ^ 0x6c62272e07bb0142ull);
        for (auto& w : state_) {
            s = splitmix64(s);
            w = s;
        }
        have_cached_normal_ = false;
    }

    RandomStream derive(std::uint64_t a, std::uint64_t b = 0) const {
        std::uint64_t k = splitmix64(key_ ^ splitmix64(a ^ 0x9e3779b97f4a7c15ull));
        k = splitmix64(k ^ splitmix64(b ^ 0xc2b2ae3d27d4eb4full));
        return RandomStream(k);
    }

    std::uint64_t next_u64() {
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

    /// Uniform on the open interval (0,1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (pair cached).
    double normal() {
        if (have_cached_normal_) {
            have_cached_normal_ = false;
            return cached_normal_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_normal_ = r * std::sin(a);
        have_cached_normal_ = true;
        return r * std::cos(a);
    }

    double exponential(double rate) {
        if (!(rate > 0.0)) throw std::domain_error("exponential: rate must be > 0");
        return -std::log(uniform()) / rate;
    }

    /// Poisson variate; Knuth below 10, Hormann's transformed rejection above.
    long poisson(double mean) {
        if (mean < 0.0 || !std::isfinite(mean)) throw std::domain_error("poisson: bad mean");
        if (mean == 0.0) return 0;
        if (mean < 10.0) {
            const double limit = std::exp(-mean);
            double prod = 1.0;
            long x = 0;
            while (true) {
                prod *= uniform();
                if (prod <= limit) return x;
                ++x;
            }
        }
        // PTRD (Hormann 1993), same scheme most simulation libraries use.
        const double log_rate = std::log(mean);
        const double b = 0.931 + 2.53 * std::sqrt(mean);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        while (true) {
            double u = uniform() - 0.5;
            double v = uniform();
            double us = 0.5 - std::fabs(u);
            double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (kf > 9.0e15) continue;
            long k = static_cast<long>(kf);
            if (us >= 0.07 && v <= vr) return k;
            if (k < 0 || (us < 0.013 && v > us)) continue;
            const double s = std::log(v * inv_alpha / (a / (us * us) + b));
            const double t = -mean + kf * log_rate - std::lgamma(kf + 1.0);
            if (s <= t) return k;
        }
    }

    std::uint64_t key() const { return key_; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t key_;
    std::uint64_t state_[4];
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

} // namespace cylsde
