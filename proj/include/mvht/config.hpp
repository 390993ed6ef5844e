// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mvht/model.hpp"

namespace mvht {

// `key = value` run configuration. Every tunable has exactly one default in
// defaults(); files and CLI flags overlay it, and unknown keys are rejected
// with their line number.
class Config {
public:
    static Config defaults();
    static Config from_file(const std::string& path);
    // name appears in parse errors in place of a file path.
    static Config from_string(const std::string& text, const std::string& name);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    void set(const std::string& key, const std::string& value);

    const std::string& gets(const std::string& key) const;
    int geti(const std::string& key) const;
    double getd(const std::string& key) const;
    bool getb(const std::string& key) const;
    uint64_t getu(const std::string& key) const;

    // FNV over the canonical sorted `key = value` serialization.
    uint64_t hash() const;
    std::string to_string() const;

    // Model/codec/schedule fields assembled from the table.
    ModelConfig model_config() const;

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace mvht
