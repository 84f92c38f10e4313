// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace smmo {

// splitmix64: small deterministic generator with cheap stream splitting.
// Used for per-agent state in the apps and for seeded test inputs.
class SplitMix64 {
public:
    SplitMix64() = default;
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound); bound > 0.
    std::uint32_t below(std::uint32_t bound) { return std::uint32_t(next() % bound); }

    // Uniform in [0, 1).
    double unit() { return double(next() >> 11) * 0x1.0p-53; }

    // Seed for a child generator, advancing this one.
    std::uint64_t split() { return next() ^ 0x6a09e667f3bcc909ULL; }

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

private:
    std::uint64_t state_ = 0;
};

}  // namespace smmo
