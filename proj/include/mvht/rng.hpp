// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <random>

#include "mvht/common.hpp"

namespace mvht {

// Deterministic random stream. mt19937_64 is bit-exact across platforms;
// the Gaussian transform is ours because std::normal_distribution is not.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed), seed0_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1).
    double uniform() {
        return (eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    int64_t uniform_int(int64_t n) {
        // Rejection sampling keeps the draw unbiased.
        uint64_t un = static_cast<uint64_t>(n);
        uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        uint64_t v;
        do {
            v = eng_();
        } while (v >= limit);
        return static_cast<int64_t>(v % un);
    }

    // Standard normal via Box-Muller, one value per call (cached pair).
    double gauss() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Independent child stream for a named purpose; keeps per-component
    // sampling stable when unrelated components consume randomness.
    Rng child(const std::string& label) const {
        uint64_t h = fnv1a_str(fnv1a(fnv1a_init(), &seed0_, sizeof(seed0_)), label);
        return Rng(h);
    }

private:
    std::mt19937_64 eng_;
    uint64_t seed0_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Convenience: derive a child seed without constructing a stream.
inline uint64_t child_seed(uint64_t seed, const std::string& label) {
    return fnv1a_str(fnv1a(fnv1a_init(), &seed, sizeof(seed)), label);
}

}  // namespace mvht
