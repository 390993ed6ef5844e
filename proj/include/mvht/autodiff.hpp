// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mvht/tensor.hpp"

namespace mvht {

// Reverse-mode autodiff over a dynamically built DAG. Nodes are created in
// topological order (operands exist before results), so descending creation
// sequence is a valid backward order.
struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Tensor val;
    Tensor grad;  // allocated lazily, same shape as val
    bool requires_grad = false;  // set on trainable leaves only
    bool needs = false;          // true if a trainable leaf is reachable below
    int64_t seq = 0;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backfn;  // reads this->grad, accumulates into parents

    void ensure_grad() {
        if (grad.data.empty()) grad = Tensor(val.shape);
    }
    void zero_grad() {
        if (!grad.data.empty()) std::fill(grad.data.begin(), grad.data.end(), 0.0);
    }
};

// Global tape switch. Off inside NoGradGuard: ops produce constants and the
// graph is never recorded.
bool& grad_enabled();

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_enabled()) { grad_enabled() = false; }
    ~NoGradGuard() { grad_enabled() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

NodePtr leaf(Tensor v, bool requires_grad = false);
NodePtr constant(Tensor v);

// Records an op result. Parents and backfn are dropped when no parent needs
// gradient, so frozen subgraphs cost no tape memory.
NodePtr make_node(Tensor v, std::vector<NodePtr> parents, std::function<void(Node&)> backfn);

// Seeds root->grad with ones (root must be scalar) and runs the tape in
// reverse creation order. Gradients accumulate across calls until zeroed.
void backward(const NodePtr& root);

}  // namespace mvht
