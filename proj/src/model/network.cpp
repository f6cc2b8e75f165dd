// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/model/network.hpp"

#include <cmath>
#include <random>
#include <string>

#include "etpp/error.hpp"
#include "etpp/numerics/ops.hpp"

namespace etpp::model {
namespace ops = numerics;

namespace {

struct ParamSpec {
    std::string name;
    numerics::Shape shape;
    bool weight = true;
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
};

std::vector<ParamSpec> param_specs(const ModelConfig& c, const NetworkDims& dims) {
    const std::size_t m = dims.m();
    const std::size_t h = c.hidden;
    const std::size_t d = m + dims.features;
    const std::size_t g = c.refine_width;
    std::vector<ParamSpec> specs;
    const auto matrix = [&](std::string name, std::size_t rows, std::size_t cols, std::size_t fan_in,
                            std::size_t fan_out) { specs.push_back({std::move(name), {rows, cols}, true, fan_in, fan_out}); };
    const auto bias = [&](std::string name, std::size_t len) { specs.push_back({std::move(name), {len}, false, 0, 0}); };
    const auto conv = [&](std::string prefix, std::size_t kh, std::size_t kw, std::size_t in) {
        specs.push_back({prefix + ".kernel", {kh, kw, in, 3}, true, kh * kw * in, kh * kw * 3});
        bias(prefix + ".bias", 3);
    };

    if (c.variant != Variant::kNoSpatial) {
        conv("conv1", 1, 3, 1);
        conv("conv2", 2, 1, 3);
        conv("conv3", 2, 3, 3);
        matrix("W_D", m, m, m, m);
        bias("b_D", m);
    }
    if (c.variant == Variant::kNoTemporal) {
        matrix("W_T", h, d, d, h);
        bias("b_T", h);
    } else {
        matrix("W_z", h, d, d, h);
        matrix("W_r", h, d, d, h);
        matrix("W_h", h, d, d, h);
        matrix("U_z", h, h, h, h);
        matrix("U_r", h, h, h, h);
        matrix("U_h", h, h, h, h);
        bias("b_z", h);
        bias("b_r", h);
        bias("b_h", h);
    }
    matrix("W_G", m, h, h, m);
    bias("b_G", m);
    matrix("W_P1", kRefineInputWidth, g, kRefineInputWidth, g);
    bias("b_P1", g);
    matrix("W_P2", g, 1, g, 1);
    bias("b_P2", 1);
    return specs;
}

void check_finite(const Tape& t, Var v, const char* layer) {
    if (!t.value(v).all_finite()) fail(ErrorKind::kNumeric, std::string("non-finite output in layer ") + layer);
}

}  // namespace

std::vector<std::string> param_names(const ModelConfig& config) {
    std::vector<std::string> names;
    for (const ParamSpec& s : param_specs(config, NetworkDims{1, 1, 0})) names.push_back(s.name);
    return names;
}

ParamSet init_params(const ModelConfig& config, const NetworkDims& dims, std::uint64_t seed) {
    validate(config);
    std::mt19937_64 rng(seed);
    ParamSet params;
    for (const ParamSpec& s : param_specs(config, dims)) {
        Array a(s.shape);
        if (s.weight) {
            const double bound = std::sqrt(6.0 / static_cast<double>(s.fan_in + s.fan_out));
            for (double& x : a.data()) {
                const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                x = bound * (2.0 * u - 1.0);
            }
        }
        params.add(s.name, std::move(a));
    }
    return params;
}

NetVars resolve_network(const ParamSet& params, std::span<const Var> bound) {
    if (bound.size() != params.size()) fail(ErrorKind::kShape, "bound parameter count does not match");
    NetVars v;
    const std::pair<const char*, Var NetVars::*> table[] = {
        {"conv1.kernel", &NetVars::conv1_k}, {"conv1.bias", &NetVars::conv1_b}, {"conv2.kernel", &NetVars::conv2_k},
        {"conv2.bias", &NetVars::conv2_b},   {"conv3.kernel", &NetVars::conv3_k}, {"conv3.bias", &NetVars::conv3_b},
        {"W_D", &NetVars::w_d},              {"b_D", &NetVars::b_d},              {"W_z", &NetVars::w_z},
        {"W_r", &NetVars::w_r},              {"W_h", &NetVars::w_h},              {"U_z", &NetVars::u_z},
        {"U_r", &NetVars::u_r},              {"U_h", &NetVars::u_h},              {"b_z", &NetVars::b_z},
        {"b_r", &NetVars::b_r},              {"b_h", &NetVars::b_h},              {"W_T", &NetVars::w_t},
        {"b_T", &NetVars::b_t},              {"W_G", &NetVars::w_g},              {"b_G", &NetVars::b_g},
        {"W_P1", &NetVars::w_p1},            {"b_P1", &NetVars::b_p1},            {"W_P2", &NetVars::w_p2},
        {"b_P2", &NetVars::b_p2},
    };
    for (std::size_t i = 0; i < params.size(); ++i) {
        bool known = false;
        for (const auto& [name, member] : table) {
            if (params.name(i) == name) {
                v.*member = bound[i];
                known = true;
            }
        }
        if (!known) fail(ErrorKind::kInvalidArgument, "unknown parameter '" + params.name(i) + "'");
    }
    return v;
}

NetVars bind_network(Tape& tape, const ParamSet& params) {
    const numerics::BoundParams bound = numerics::bind(tape, params);
    return resolve_network(params, bound.vars);
}

Var spatial_forward(Tape& t, const Network& net, const NetVars& v, Var grid_map) {
    const NetworkDims& dims = net.dims;
    const Array& x = t.value(grid_map);
    if (x.size() != dims.m()) {
        fail(ErrorKind::kShape, "spatial_forward: grid map " + numerics::shape_string(x.shape()) + " != " +
                                    std::to_string(dims.grid_rows) + "x" + std::to_string(dims.grid_cols));
    }
    if (net.config.variant == Variant::kNoSpatial) return ops::reshape(t, grid_map, {dims.m()});

    Var h = ops::reshape(t, grid_map, {dims.grid_rows, dims.grid_cols, 1});
    h = ops::relu(t, ops::conv2d(t, h, v.conv1_k, v.conv1_b));
    check_finite(t, h, "conv1");
    h = ops::relu(t, ops::conv2d(t, h, v.conv2_k, v.conv2_b));
    check_finite(t, h, "conv2");
    h = ops::relu(t, ops::conv2d(t, h, v.conv3_k, v.conv3_b));
    check_finite(t, h, "conv3");
    h = net.config.channel_merge == ChannelMerge::kMean ? ops::channel_mean(t, h) : ops::channel_sum(t, h);
    const Var flat = ops::reshape(t, h, {dims.m()});
    const Var d = ops::relu(t, ops::dense(t, v.w_d, flat, v.b_d));
    check_finite(t, d, "spatial dense");
    return d;
}

TemporalOut temporal_step(Tape& t, const Network& net, const NetVars& v, Var d, Var features, Var h_prev) {
    if (t.value(features).size() != net.dims.features) {
        fail(ErrorKind::kShape, "temporal_step: " + std::to_string(t.value(features).size()) +
                                    " event features, expected q = " + std::to_string(net.dims.features));
    }
    const Var x = ops::concat(t, d, features);
    Var hidden;
    if (net.config.variant == Variant::kNoTemporal) {
        hidden = ops::tanh(t, ops::dense(t, v.w_t, x, v.b_t));
    } else {
        const ops::GruWeights w{v.w_z, v.w_r, v.w_h, v.u_z, v.u_r, v.u_h, v.b_z, v.b_r, v.b_h};
        hidden = ops::gru_cell(t, x, h_prev, w, net.config.gru_activation);
    }
    check_finite(t, hidden, "recurrent");
    const Var g_hat = ops::dense(t, v.w_g, hidden, v.b_g);
    check_finite(t, g_hat, "grid output");
    return {hidden, g_hat};
}

Var refine_forward(Tape& t, const NetVars& v, Var g_hat, std::vector<std::size_t> grid_index,
                   const Array& static_rows) {
    if (static_rows.rank() != 2 || static_rows.dim(0) != grid_index.size() ||
        static_rows.dim(1) != kRefineInputWidth - 1) {
        fail(ErrorKind::kShape, "refine_forward: seat features " + numerics::shape_string(static_rows.shape()) +
                                    " for " + std::to_string(grid_index.size()) + " seats");
    }
    const Var price = ops::gather(t, g_hat, std::move(grid_index));
    const Var x = ops::prepend_column(t, price, t.constant(static_rows));
    const Var inner = ops::relu(t, ops::add_row_bias(t, ops::matmul(t, x, v.w_p1), v.b_p1));
    const Var out = ops::add_row_bias(t, ops::matmul(t, inner, v.w_p2), v.b_p2);
    check_finite(t, out, "refine");
    return out;
}

ForwardResult forward_event(Tape& t, const Network& net, const NetVars& v, const Array& input, const Array& features,
                            std::span<const RefineRequest> refine) {
    const std::size_t m = net.dims.m();
    const std::size_t L = net.config.bins;
    if (input.rank() != 2 || input.dim(0) != m || input.dim(1) != L) {
        fail(ErrorKind::kShape, "forward_event: input " + numerics::shape_string(input.shape()) + " != [" +
                                    std::to_string(m) + " x " + std::to_string(L) + "]");
    }
    if (!refine.empty() && refine.size() != L) fail(ErrorKind::kShape, "forward_event: one refine request per bin");

    const Var feat = t.constant(features);
    Var h = t.constant(Array({net.config.hidden}));
    ForwardResult out;
    out.g_hat.reserve(L);
    out.p_hat.resize(L);
    for (std::size_t j = 0; j < L; ++j) {
        Array map({net.dims.grid_rows, net.dims.grid_cols});
        for (std::size_t g = 0; g < m; ++g) map[g] = input.at(g, j);
        const Var d = spatial_forward(t, net, v, t.constant(std::move(map)));
        const TemporalOut step = temporal_step(t, net, v, d, feat, h);
        h = step.hidden;
        out.g_hat.push_back(step.g_hat);
        if (!refine.empty() && !refine[j].grid_index.empty()) {
            out.p_hat[j] = refine_forward(t, v, step.g_hat, refine[j].grid_index, refine[j].static_rows);
        }
    }
    return out;
}

Var bilevel_loss(Tape& t, std::span<const MaskedTarget> grid, std::span<const MaskedTarget> seat, double alpha,
                 double beta) {
    if (!(alpha >= 0.0) || !(beta >= 0.0)) fail(ErrorKind::kInvalidArgument, "bilevel_loss: alpha and beta must be >= 0");
    std::vector<Var> terms;
    const auto add_term = [&](std::span<const MaskedTarget> items, double weight) {
        if (weight == 0.0 || items.empty()) return;
        std::vector<Var> parts;
        parts.reserve(items.size());
        for (const MaskedTarget& item : items) parts.push_back(ops::masked_sse(t, item.pred, item.target, item.mask));
        terms.push_back(ops::scale(t, ops::sum(t, parts), weight));
    };
    add_term(grid, alpha);
    add_term(seat, beta);
    if (terms.empty()) return t.constant(Array::scalar(0.0));
    return terms.size() == 1 ? terms[0] : ops::add(t, terms[0], terms[1]);
}

}  // namespace etpp::model
