// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "etpp/numerics/array.hpp"

namespace etpp::numerics {

/// Handle to a value recorded on a Tape.
struct Var {
    std::uint32_t id = std::numeric_limits<std::uint32_t>::max();

    [[nodiscard]] bool valid() const noexcept { return id != std::numeric_limits<std::uint32_t>::max(); }
};

/// Reverse-mode record of array-valued primitive ops.
///
/// Nodes are appended in execution order, so the node list is already a
/// topological order. `backward` walks it once in reverse. A node only keeps a
/// backward closure when at least one of its inputs requires a gradient, which
/// keeps constant sub-graphs (imputed inputs, seat coordinates) free.
class Tape {
   public:
    using BackwardFn = std::function<void(Tape&, const Array& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Array value, bool requires_grad = true);
    Var constant(Array value) { return leaf(std::move(value), false); }

    /// Appends a derived node. `backward` receives d(root)/d(this node) and
    /// accumulates into the inputs via `accumulate`.
    Var record(Array value, std::span<const Var> inputs, BackwardFn backward);
    Var record(Array value, std::initializer_list<Var> inputs, BackwardFn backward) {
        return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
    }

    [[nodiscard]] const Array& value(Var v) const { return nodes_.at(v.id).value; }
    [[nodiscard]] bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

    /// Gradient of the last `backward` root w.r.t. v; zeros if v was not reached.
    [[nodiscard]] Array grad(Var v) const;

    /// Mutable gradient buffer of v, allocated as zeros on first access.
    Array& accumulator(Var v);

    void backward(Var root);

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    void reserve(std::size_t n) { nodes_.reserve(n); }

   private:
    struct Node {
        Array value;
        Array grad;
        bool requires_grad = false;
        bool has_grad = false;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
};

}  // namespace etpp::numerics
