// Copyright (c) 2026 the mvht authors
// SPDX-License-Identifier: Apache-2.0

#include "mvht/autodiff.hpp"

#include <algorithm>
#include <unordered_set>

namespace mvht {

bool& grad_enabled() {
    static bool on = true;
    return on;
}

namespace {
int64_t next_seq() {
    static int64_t seq = 0;
    return ++seq;
}
}  // namespace

NodePtr leaf(Tensor v, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->val = std::move(v);
    n->requires_grad = requires_grad;
    n->needs = requires_grad;
    n->seq = next_seq();
    return n;
}

NodePtr constant(Tensor v) { return leaf(std::move(v), false); }

NodePtr make_node(Tensor v, std::vector<NodePtr> parents, std::function<void(Node&)> backfn) {
    auto n = std::make_shared<Node>();
    n->val = std::move(v);
    n->seq = next_seq();
    if (grad_enabled()) {
        for (const auto& p : parents)
            if (p->needs) {
                n->needs = true;
                break;
            }
        if (n->needs) {
            n->parents = std::move(parents);
            n->backfn = std::move(backfn);
        }
    }
    return n;
}

void backward(const NodePtr& root) {
    if (root->val.numel() != 1) throw param_error("backward: root must be scalar");
    root->ensure_grad();
    root->grad.data[0] += 1.0;

    // Collect reachable recorded nodes, then run backfns by descending seq.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents)
            if (p->needs && seen.insert(p.get()).second) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->seq > b->seq; });
    for (Node* n : order)
        if (n->backfn) {
            n->ensure_grad();
            n->backfn(*n);
        }
}

}  // namespace mvht
