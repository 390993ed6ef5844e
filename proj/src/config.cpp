// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#include "mvht/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mvht/common.hpp"
#include "mvht/diffusion.hpp"
#include "mvht/forge.hpp"
#include "mvht/train.hpp"

namespace mvht {

namespace {

std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& want) {
    throw param_error("config key '" + key + "' is not " + want);
}

}  // namespace

Config Config::defaults() {
    Config c;
    auto put = [&c](const std::string& k, const std::string& v) { c.kv_[k] = v; };
    auto puti = [&put](const std::string& k, long long v) { put(k, std::to_string(v)); };
    auto putd = [&put](const std::string& k, double v) { put(k, fmt_num(v)); };

    put("seed", "0");
    puti("model_seed", 1);
    puti("codec_seed", 2);

    // Model shape; single source of truth is ModelConfig's initializers.
    ModelConfig mc;
    puti("image_size", mc.image_size);
    puti("image_channels", mc.image_channels);
    puti("f", mc.f);
    puti("base_channels", mc.base_channels);
    {
        std::string m;
        for (size_t i = 0; i < mc.multipliers.size(); ++i)
            m += (i ? "," : "") + std::to_string(mc.multipliers[i]);
        put("multipliers", m);
    }
    puti("blocks_per_level", mc.blocks_per_level);
    puti("heads", mc.heads);
    puti("embed_dim", mc.embed_dim);
    puti("max_frames", mc.max_frames);
    put("identity_mode", mc.identity_mode);

    puti("schedule_t", kScheduleT);
    putd("beta_start", kBetaStart);
    putd("beta_end", kBetaEnd);

    GuidanceConfig gc;
    puti("ddim_steps", gc.sampler_steps);
    putd("cfg_scale", gc.cfg_scale);

    ForgeConfig fc;
    puti("identities", 8);
    puti("views", kDefaultViews);
    puti("refs", kDefaultRefs);
    puti("backgrounds", fc.backgrounds);
    putd("arc", fc.arc);
    putd("polar_max", fc.polar_max);
    putd("ref_scale_jitter", kRefScaleJitter);

    putd("lr", kPaperLr * kToyLrScale);
    puti("batch", 4);
    putd("dropout", kCondDropout);
    puti("seq_len", kSeqLen);
    puti("steps_bald", 600);
    puti("steps_s1", 600);
    puti("steps_s2", 900);
    puti("steps_s3", 300);
    put("s3_bald_shared", "true");
    putd("pose_noise_sigma", 0.0);
    return c;
}

Config Config::from_string(const std::string& text, const std::string& name) {
    Config c = defaults();
    std::istringstream in(text);
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        std::string where = name + ":" + std::to_string(ln) + ": ";
        if (eq == std::string::npos) throw param_error(where + "expected `key = value`");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw param_error(where + "empty key");
        if (value.empty()) throw param_error(where + "empty value for '" + key + "'");
        if (c.kv_.count(key) == 0) throw param_error(where + "unknown config key '" + key + "'");
        c.kv_[key] = value;
    }
    return c;
}

Config Config::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str(), path);
}

void Config::set(const std::string& key, const std::string& value) {
    if (kv_.count(key) == 0) throw param_error("unknown config key '" + key + "'");
    if (trim(value).empty()) throw param_error("empty value for config key '" + key + "'");
    kv_[key] = trim(value);
}

const std::string& Config::gets(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw param_error("unknown config key '" + key + "'");
    return it->second;
}

int Config::geti(const std::string& key) const {
    const std::string& v = gets(key);
    size_t pos = 0;
    long n = 0;
    try {
        n = std::stol(v, &pos);
    } catch (const std::exception&) {
        bad_value(key, "an integer");
    }
    if (pos != v.size()) bad_value(key, "an integer");
    return static_cast<int>(n);
}

double Config::getd(const std::string& key) const {
    const std::string& v = gets(key);
    size_t pos = 0;
    double d = 0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        bad_value(key, "a number");
    }
    if (pos != v.size()) bad_value(key, "a number");
    return d;
}

bool Config::getb(const std::string& key) const {
    const std::string& v = gets(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, "a boolean (true/false/1/0)");
}

uint64_t Config::getu(const std::string& key) const {
    const std::string& v = gets(key);
    size_t pos = 0;
    unsigned long long n = 0;
    try {
        n = std::stoull(v, &pos);
    } catch (const std::exception&) {
        bad_value(key, "an unsigned integer");
    }
    if (pos != v.size()) bad_value(key, "an unsigned integer");
    return static_cast<uint64_t>(n);
}

std::string Config::to_string() const {
    std::string out;
    for (const auto& [k, v] : kv_) out += k + " = " + v + "\n";
    return out;
}

uint64_t Config::hash() const { return fnv1a_str(fnv1a_init(), to_string()); }

ModelConfig Config::model_config() const {
    ModelConfig mc;
    mc.image_size = geti("image_size");
    mc.image_channels = geti("image_channels");
    mc.f = geti("f");
    mc.base_channels = geti("base_channels");
    mc.multipliers.clear();
    {
        const std::string& m = gets("multipliers");
        std::istringstream in(m);
        std::string tok;
        while (std::getline(in, tok, ',')) {
            tok = trim(tok);
            size_t pos = 0;
            long v = 0;
            try {
                v = std::stol(tok, &pos);
            } catch (const std::exception&) {
                bad_value("multipliers", "a comma-separated integer list");
            }
            if (pos != tok.size()) bad_value("multipliers", "a comma-separated integer list");
            mc.multipliers.push_back(static_cast<int>(v));
        }
        if (mc.multipliers.empty()) bad_value("multipliers", "a comma-separated integer list");
    }
    mc.blocks_per_level = geti("blocks_per_level");
    mc.heads = geti("heads");
    mc.embed_dim = geti("embed_dim");
    mc.max_frames = geti("max_frames");
    mc.identity_mode = gets("identity_mode");
    mc.validate();
    return mc;
}

}  // namespace mvht
