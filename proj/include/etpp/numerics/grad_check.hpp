// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "etpp/numerics/params.hpp"
#include "etpp/numerics/tape.hpp"

namespace etpp::numerics {

/// Builds a scalar graph from freshly bound parameters.
using GraphBuilder = std::function<Var(Tape&, const BoundParams&)>;

struct ParamGradError {
    std::string name;
    double max_relative_error = 0.0;
    double max_abs_analytic = 0.0;
    bool finite = true;
};

struct GradCheckReport {
    double loss = 0.0;
    double max_relative_error = 0.0;
    std::vector<ParamGradError> params;

    [[nodiscard]] bool passed(double tolerance) const;
};

struct GradCheckOptions {
    double step = 1e-5;
    /// Relative errors use max(|analytic|, |numeric|, floor) as denominator,
    /// with floor = floor_scale * max(1, |loss|). This bounds the effect of
    /// round-off in the numeric derivative on gradients that are essentially 0.
    double floor_scale = 1e-6;
};

/// Central finite differences against tape gradients, entry by entry.
GradCheckReport grad_check(const GraphBuilder& build, const ParamSet& params, GradCheckOptions options = {});

/// Scalar value of the graph at the given parameters.
double evaluate(const GraphBuilder& build, const ParamSet& params);

}  // namespace etpp::numerics
