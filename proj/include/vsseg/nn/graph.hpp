#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "vsseg/errors.hpp"
#include "vsseg/tensor.hpp"

// Reverse-mode autodiff on dense tensors. Graphs are built per forward pass
// and freed when the root goes out of scope; parameter leaves persist and
// accumulate gradients across samples.

namespace vsseg::nn {

template <typename T>
struct Node {
    TensorT<T> value;
    TensorT<T> grad;  // allocated on first use
    bool requires_grad = false;
    std::uint64_t id = 0;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void()> backward_fn;

    void ensure_grad() {
        if (grad.data.size() != value.data.size()) grad = TensorT<T>(value.shape, T(0));
    }
    void zero_grad() {
        if (!grad.data.empty()) grad.fill(T(0));
    }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

namespace detail {
template <typename T>
inline std::uint64_t next_id() {
    static std::uint64_t counter = 0;
    return ++counter;
}

inline bool& grad_mode() {
    static bool enabled = true;
    return enabled;
}
}  // namespace detail

// Disables graph recording in a scope; inference paths use this to keep
// memory flat.
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() { return detail::grad_mode(); }

template <typename T>
Var<T> leaf(TensorT<T> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->id = detail::next_id<T>();
    return n;
}

template <typename T>
Var<T> constant(TensorT<T> value) {
    return leaf(std::move(value), false);
}

// Creates an interior node. The backward function reads node->grad and
// accumulates into the parents' grads; it is dropped entirely when no parent
// needs gradients or when grad mode is off.
template <typename T>
Var<T> make_node(TensorT<T> value, std::vector<Var<T>> parents,
                 std::function<void(Node<T>&)> backward) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->id = detail::next_id<T>();
    bool need = false;
    if (detail::grad_mode()) {
        for (const auto& p : parents) need = need || p->requires_grad;
    }
    if (need) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        Node<T>* raw = n.get();
        n->backward_fn = [raw, backward]() { backward(*raw); };
    }
    return n;
}

// Backpropagates from a scalar root; `seed` scales the whole gradient, which
// is how per-sample losses are averaged into batch gradients.
template <typename T>
void backward(const Var<T>& root, T seed = T(1)) {
    if (root->value.numel() != 1) throw Error("backward: root must be scalar");
    if (!root->requires_grad) return;

    // Topological order by creation id, newest first.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<Node<T>*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        Node<T>* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }
    std::sort(order.begin(), order.end(),
              [](const Node<T>* a, const Node<T>* b) { return a->id > b->id; });

    root->ensure_grad();
    root->grad[0] += seed;
    for (Node<T>* n : order) {
        if (n->backward_fn) n->backward_fn();
    }
}

}  // namespace vsseg::nn
