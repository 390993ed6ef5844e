// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mvht {

// Error categories map onto CLI exit codes (see tools/mvht.cpp).
struct param_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct prereq_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kVersion = "mvht 0.1.0";

// FNV-1a, used for manifest checksums, config hashes and checkpoint digests.
inline uint64_t fnv1a_init() { return 1469598103934665603ULL; }

inline uint64_t fnv1a(uint64_t h, const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline uint64_t fnv1a_str(uint64_t h, const std::string& s) {
    return fnv1a(h, s.data(), s.size());
}

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

}  // namespace mvht
