// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#include "mvht/params.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

namespace mvht {

NodePtr ParamStore::add(const std::string& name, Tensor init, bool trainable) {
    if (params_.count(name)) throw param_error("ParamStore: duplicate parameter " + name);
    auto n = leaf(std::move(init), trainable);
    params_.emplace(name, n);
    return n;
}

const NodePtr& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw param_error("ParamStore: unknown parameter " + name);
    return it->second;
}

void ParamStore::set_trainable(const std::function<bool(const std::string&)>& pred) {
    for (auto& [name, node] : params_) {
        bool on = pred(name);
        node->requires_grad = on;
        node->needs = on;
    }
}

void ParamStore::zero_grad() {
    for (auto& [name, node] : params_) node->zero_grad();
}

uint64_t ParamStore::checksum(const std::string& prefix) const {
    uint64_t h = fnv1a_init();
    for (const auto& [name, node] : params_) {
        if (name.rfind(prefix, 0) != 0) continue;
        h = fnv1a_str(h, name);
        h = fnv1a(h, node->val.data.data(), node->val.data.size() * sizeof(double));
    }
    return h;
}

double ParamStore::grad_norm(const std::string& prefix) const {
    double s = 0.0;
    for (const auto& [name, node] : params_) {
        if (name.rfind(prefix, 0) != 0) continue;
        for (double g : node->grad.data) s += g * g;
    }
    return std::sqrt(s);
}

int64_t ParamStore::count(const std::string& prefix) const {
    int64_t n = 0;
    for (const auto& [name, node] : params_)
        if (name.rfind(prefix, 0) == 0) n += node->val.numel();
    return n;
}

void Adam::step(ParamStore& store) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (const auto& [name, node] : store.all()) {
        if (!node->requires_grad || node->grad.data.empty()) continue;
        Tensor& m = m_.try_emplace(name, Tensor(node->val.shape)).first->second;
        Tensor& v = v_.try_emplace(name, Tensor(node->val.shape)).first->second;
        for (size_t i = 0; i < node->val.data.size(); ++i) {
            double g = node->grad.data[i];
            m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * g;
            v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * g * g;
            double mh = m.data[i] / bc1, vh = v.data[i] / bc2;
            node->val.data[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
}

namespace {

constexpr char kMagic[8] = {'M', 'V', 'H', 'T', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersionTag = 1;

void put_u32(std::ostream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_str(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
uint32_t get_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw io_error("checkpoint: truncated");
    return v;
}
std::string get_str(std::istream& is) {
    uint32_t n = get_u32(is);
    if (n > (1u << 20)) throw data_error("checkpoint: implausible string length");
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw io_error("checkpoint: truncated");
    return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::map<std::string, std::string>& meta,
                     const ParamStore& store) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("checkpoint: cannot open for write: " + path);
    os.write(kMagic, sizeof(kMagic));
    put_u32(os, kVersionTag);
    put_u32(os, static_cast<uint32_t>(meta.size()));
    for (const auto& [k, v] : meta) {
        put_str(os, k);
        put_str(os, v);
    }
    put_u32(os, static_cast<uint32_t>(store.all().size()));
    for (const auto& [name, node] : store.all()) {
        put_str(os, name);
        put_u32(os, static_cast<uint32_t>(node->val.rank()));
        for (int d : node->val.shape) put_u32(os, static_cast<uint32_t>(d));
        os.write(reinterpret_cast<const char*>(node->val.data.data()),
                 static_cast<std::streamsize>(node->val.data.size() * sizeof(double)));
    }
    if (!os) throw io_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("checkpoint: cannot open: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::string(magic, 8) != std::string(kMagic, 8))
        throw data_error("checkpoint: bad magic: " + path);
    if (get_u32(is) != kVersionTag) throw data_error("checkpoint: unsupported version");

    Checkpoint ck;
    uint32_t nmeta = get_u32(is);
    for (uint32_t i = 0; i < nmeta; ++i) {
        std::string k = get_str(is);
        ck.meta[k] = get_str(is);
    }
    uint32_t ntens = get_u32(is);
    for (uint32_t i = 0; i < ntens; ++i) {
        std::string name = get_str(is);
        uint32_t rank = get_u32(is);
        if (rank > 8) throw data_error("checkpoint: implausible rank");
        std::vector<int> shape(rank);
        for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(get_u32(is));
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!is) throw io_error("checkpoint: truncated tensor " + name);
        ck.tensors.emplace(std::move(name), std::move(t));
    }
    return ck;
}

}  // namespace mvht
