// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "etpp/numerics/array.hpp"
#include "etpp/numerics/tape.hpp"

namespace etpp::numerics {

/// Ordered collection of named parameter arrays. Order is insertion order and
/// is the order used for serialization, optimizer state, and gradient checks.
class ParamSet {
   public:
    void add(std::string name, Array value);

    [[nodiscard]] bool contains(std::string_view name) const;
    [[nodiscard]] const Array& get(std::string_view name) const;
    Array& get(std::string_view name);

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] const std::string& name(std::size_t i) const { return entries_.at(i).first; }
    [[nodiscard]] const Array& at(std::size_t i) const { return entries_.at(i).second; }
    Array& at(std::size_t i) { return entries_.at(i).second; }

    /// Total scalar count across all arrays.
    [[nodiscard]] std::size_t scalar_count() const;

    friend bool operator==(const ParamSet&, const ParamSet&) = default;

   private:
    std::vector<std::pair<std::string, Array>> entries_;
};

/// Parameters registered on a tape as gradient-carrying leaves, index-aligned
/// with the ParamSet they came from.
struct BoundParams {
    std::vector<Var> vars;

    [[nodiscard]] Var operator[](std::size_t i) const { return vars.at(i); }
};

BoundParams bind(Tape& tape, const ParamSet& params);

/// Gradients of every bound parameter, index-aligned with the ParamSet.
std::vector<Array> collect_grads(const Tape& tape, const BoundParams& bound);

}  // namespace etpp::numerics
