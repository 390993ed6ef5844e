// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <string>

#include "mvht/autodiff.hpp"
#include "mvht/common.hpp"

namespace mvht {

// Named persistent leaves. Names are dot-separated with the leading segment
// acting as the freeze namespace ("backbone.", "identity.", "hair.",
// "temporal."). std::map order makes serialization and the optimizer loop
// deterministic.
class ParamStore {
public:
    NodePtr add(const std::string& name, Tensor init, bool trainable = true);
    const NodePtr& get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    const std::map<std::string, NodePtr>& all() const { return params_; }

    // Marks each parameter trainable iff pred(name). Takes effect at the
    // next graph build.
    void set_trainable(const std::function<bool(const std::string&)>& pred);
    void zero_grad();

    // FNV-1a over the raw value bytes of every parameter whose name starts
    // with prefix ("" = all).
    uint64_t checksum(const std::string& prefix = "") const;
    // L2 norm of accumulated gradients over a namespace; missing grads are 0.
    double grad_norm(const std::string& prefix = "") const;
    int64_t count(const std::string& prefix = "") const;

private:
    std::map<std::string, NodePtr> params_;
};

// Adaptive-moment gradient descent over the trainable subset.
struct Adam {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void step(ParamStore& store);

private:
    int64_t t_ = 0;
    std::map<std::string, Tensor> m_, v_;
};

// Versioned binary checkpoint: string metadata plus named f64 tensors, both
// written in map order so identical state yields identical bytes.
void save_checkpoint(const std::string& path, const std::map<std::string, std::string>& meta,
                     const ParamStore& store);

struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::map<std::string, Tensor> tensors;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace mvht
