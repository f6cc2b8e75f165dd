// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/numerics/params.hpp"

#include <algorithm>

#include "etpp/error.hpp"

namespace etpp::numerics {

void ParamSet::add(std::string name, Array value) {
    if (contains(name)) fail(ErrorKind::kInvalidArgument, "duplicate parameter '" + name + "'");
    entries_.emplace_back(std::move(name), std::move(value));
}

bool ParamSet::contains(std::string_view name) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

const Array& ParamSet::get(std::string_view name) const {
    for (const auto& [key, value] : entries_) {
        if (key == name) return value;
    }
    fail(ErrorKind::kInvalidArgument, "unknown parameter '" + std::string(name) + "'");
}

Array& ParamSet::get(std::string_view name) {
    return const_cast<Array&>(static_cast<const ParamSet&>(*this).get(name));
}

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.size();
    return n;
}

BoundParams bind(Tape& tape, const ParamSet& params) {
    BoundParams bound;
    bound.vars.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) bound.vars.push_back(tape.leaf(params.at(i), true));
    return bound;
}

std::vector<Array> collect_grads(const Tape& tape, const BoundParams& bound) {
    std::vector<Array> grads;
    grads.reserve(bound.vars.size());
    for (const Var v : bound.vars) grads.push_back(tape.grad(v));
    return grads;
}

}  // namespace etpp::numerics
