// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "etpp/error.hpp"

namespace etpp::numerics {

bool GradCheckReport::passed(double tolerance) const {
    return std::all_of(params.begin(), params.end(),
                       [tolerance](const ParamGradError& p) { return p.finite && p.max_relative_error <= tolerance; });
}

double evaluate(const GraphBuilder& build, const ParamSet& params) {
    Tape tape;
    const BoundParams bound = bind(tape, params);
    const Var out = build(tape, bound);
    if (tape.value(out).size() != 1) fail(ErrorKind::kShape, "grad_check: graph output must be a scalar");
    return tape.value(out)[0];
}

GradCheckReport grad_check(const GraphBuilder& build, const ParamSet& params, GradCheckOptions options) {
    GradCheckReport report;
    std::vector<Array> analytic;
    {
        Tape tape;
        const BoundParams bound = bind(tape, params);
        const Var out = build(tape, bound);
        if (tape.value(out).size() != 1) fail(ErrorKind::kShape, "grad_check: graph output must be a scalar");
        report.loss = tape.value(out)[0];
        if (!std::isfinite(report.loss)) fail(ErrorKind::kNumeric, "grad_check: loss is not finite");
        tape.backward(out);
        analytic = collect_grads(tape, bound);
    }
    const double floor = options.floor_scale * std::max(1.0, std::abs(report.loss));

    ParamSet probe = params;
    for (std::size_t p = 0; p < params.size(); ++p) {
        ParamGradError entry;
        entry.name = params.name(p);
        Array& values = probe.at(p);
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double original = values[k];
            values[k] = original + options.step;
            const double up = evaluate(build, probe);
            values[k] = original - options.step;
            const double down = evaluate(build, probe);
            values[k] = original;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                entry.finite = false;
                continue;
            }
            const double numeric = (up - down) / (2.0 * options.step);
            const double a = analytic[p][k];
            const double denom = std::max({std::abs(a), std::abs(numeric), floor});
            entry.max_relative_error = std::max(entry.max_relative_error, std::abs(a - numeric) / denom);
            entry.max_abs_analytic = std::max(entry.max_abs_analytic, std::abs(a));
        }
        report.max_relative_error = std::max(report.max_relative_error, entry.max_relative_error);
        report.params.push_back(std::move(entry));
    }
    return report;
}

}  // namespace etpp::numerics
