// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstdint>
#include <vector>

#include "etpp/numerics/array.hpp"
#include "etpp/numerics/params.hpp"

namespace etpp::numerics {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First and second moments per parameter plus the step counter.
struct AdamState {
    AdamOptions options;
    std::vector<Array> first_moment;
    std::vector<Array> second_moment;
    std::uint64_t step = 0;

    static AdamState zeros_like(const ParamSet& params, AdamOptions options);
};

/// Bias-corrected Adam update:
///   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
///   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// Throws (naming the parameter) and leaves everything untouched if any
/// gradient entry is non-finite.
void adam_step(ParamSet& params, const std::vector<Array>& grads, AdamState& state);

}  // namespace etpp::numerics
