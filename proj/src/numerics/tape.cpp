// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/numerics/tape.hpp"

#include <string>

#include "etpp/error.hpp"

namespace etpp::numerics {

Var Tape::leaf(Array value, bool requires_grad) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(Array value, std::span<const Var> inputs, BackwardFn backward) {
    Node node;
    node.value = std::move(value);
    for (const Var in : inputs) {
        if (in.valid() && nodes_.at(in.id).requires_grad) node.requires_grad = true;
    }
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Array Tape::grad(Var v) const {
    const Node& node = nodes_.at(v.id);
    if (node.has_grad) return node.grad;
    return Array(node.value.shape());
}

Array& Tape::accumulator(Var v) {
    Node& node = nodes_.at(v.id);
    if (!node.has_grad) {
        node.grad = Array(node.value.shape());
        node.has_grad = true;
    }
    return node.grad;
}

void Tape::backward(Var root) {
    if (value(root).size() != 1) {
        fail(ErrorKind::kShape, "backward root must be a scalar, got shape " + shape_string(value(root).shape()));
    }
    for (Node& node : nodes_) {
        node.has_grad = false;
        node.grad = Array();
    }
    accumulator(root)[0] = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
        Node& node = nodes_[i];
        if (!node.has_grad || !node.backward) continue;
        // Inputs always have smaller ids, so node.grad is never written here.
        node.backward(*this, node.grad);
    }
}

}  // namespace etpp::numerics
