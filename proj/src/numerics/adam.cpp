// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/numerics/adam.hpp"

#include <cmath>
#include <string>

#include "etpp/error.hpp"

namespace etpp::numerics {

AdamState AdamState::zeros_like(const ParamSet& params, AdamOptions options) {
    AdamState state;
    state.options = options;
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.first_moment.emplace_back(params.at(i).shape());
        state.second_moment.emplace_back(params.at(i).shape());
    }
    return state;
}

void adam_step(ParamSet& params, const std::vector<Array>& grads, AdamState& state) {
    if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size()) {
        fail(ErrorKind::kShape, "adam_step: expected " + std::to_string(params.size()) + " gradient/moment arrays");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Shape& shape = params.at(i).shape();
        if (grads[i].shape() != shape || state.first_moment[i].shape() != shape ||
            state.second_moment[i].shape() != shape) {
            fail(ErrorKind::kShape, "adam_step: shape mismatch for parameter '" + params.name(i) + "'");
        }
        if (!grads[i].all_finite()) {
            fail(ErrorKind::kNumeric, "adam_step: non-finite gradient for parameter '" + params.name(i) + "'");
        }
    }

    const AdamOptions& o = state.options;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(o.beta1, t);
    const double bias2 = 1.0 - std::pow(o.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Array& p = params.at(i);
        Array& m = state.first_moment[i];
        Array& v = state.second_moment[i];
        const Array& g = grads[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
            v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
            const double m_hat = m[k] / bias1;
            const double v_hat = v[k] / bias2;
            p[k] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
        }
    }
}

}  // namespace etpp::numerics
