#pragma once

#include <cmath>
#include <cstdint>

namespace ldp {

// xoshiro256++ seeded via splitmix64. Self-contained so that runs are
// bit-reproducible across compilers and standard libraries (std::
// distributions are implementation-defined).
class Rng {
public:
    explicit Rng(uint64_t seed = 0) {
        uint64_t x = seed;
        for (auto& word : state_) {
            x += 0x9e3779b97f4a7c15ull;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            word = z ^ (z >> 31);
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t      = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform in [0, 1)
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [lo, hi], inclusive; unbiased via rejection
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        if (span == 0) return lo + static_cast<int64_t>(next_u64());  // full 64-bit range
        const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return lo + static_cast<int64_t>(r % span);
    }

    // standard normal via Box-Muller; spare value cached
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2                = uniform();
        const double mag  = std::sqrt(-2.0 * std::log(u1));
        const double ang  = 2.0 * 3.14159265358979323846 * u2;
        spare_            = mag * std::sin(ang);
        has_spare_        = true;
        return mag * std::cos(ang);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4];
    double spare_    = 0.0;
    bool has_spare_  = false;
};

}  // namespace ldp
