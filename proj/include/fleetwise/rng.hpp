#pragma once

#include <cmath>
#include <cstdint>

namespace fleetwise {

/// Counter-derived deterministic random stream (SplitMix64 core).
///
/// Every consumer that needs schedule-independent randomness derives its own
/// substream from (seed, key...) instead of sharing a mutable generator, so
/// results do not depend on evaluation order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

    /// Derive an independent stream keyed by up to three indices.
    static Rng substream(std::uint64_t seed, std::uint64_t a,
                         std::uint64_t b = 0, std::uint64_t c = 0) {
        std::uint64_t s = mix(seed ^ 0x9e3779b97f4a7c15ULL);
        s = mix(s ^ a);
        s = mix(s ^ (b + 0xbf58476d1ce4e5b9ULL));
        s = mix(s ^ (c + 0x94d049bb133111ebULL));
        return Rng(s, Tag{});
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix_out(state_);
    }

    /// Uniform on [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via the Marsaglia polar method (one spare cached per
    /// accepted pair).
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    /// Integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

private:
    struct Tag {};
    Rng(std::uint64_t raw_state, Tag) : state_(raw_state) {}

    static std::uint64_t mix_out(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t mix(std::uint64_t z) {
        return mix_out(z + 0x9e3779b97f4a7c15ULL);
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fleetwise
