// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "etpp/model/config.hpp"
#include "etpp/numerics/array.hpp"
#include "etpp/numerics/params.hpp"
#include "etpp/numerics/tape.hpp"

namespace etpp::model {

using numerics::Array;
using numerics::ParamSet;
using numerics::Tape;
using numerics::Var;

/// Sizes the parameter shapes depend on. Seat count n only enters through the
/// refine rows and is not part of the parameter shapes.
struct NetworkDims {
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;
    std::size_t features = 0;  ///< q

    [[nodiscard]] std::size_t m() const noexcept { return grid_rows * grid_cols; }

    friend bool operator==(const NetworkDims&, const NetworkDims&) = default;
};

/// Width of the refine input: grid price, dte, row, col.
inline constexpr std::size_t kRefineInputWidth = 4;

/// Glorot-uniform weights, zero biases. The parameter set depends on the
/// variant: etpp1 has W_T/b_T instead of the GRU group, etpp2 has no conv or
/// W_D parameters.
ParamSet init_params(const ModelConfig& config, const NetworkDims& dims, std::uint64_t seed);

/// Every parameter name the config/dims combination requires, in order.
std::vector<std::string> param_names(const ModelConfig& config);

/// Parameters bound to a tape, resolved by name. Absent groups stay invalid.
struct NetVars {
    Var conv1_k, conv1_b, conv2_k, conv2_b, conv3_k, conv3_b;
    Var w_d, b_d;
    Var w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h;
    Var w_t, b_t;
    Var w_g, b_g;
    Var w_p1, b_p1, w_p2, b_p2;
};

NetVars bind_network(Tape& tape, const ParamSet& params);
/// Resolves vars already bound (index-aligned with params).
NetVars resolve_network(const ParamSet& params, std::span<const Var> bound);

struct Network {
    ModelConfig config;
    NetworkDims dims;
};

/// Grid map [grid_rows x grid_cols] -> D [m]: three conv layers (1x3, 2x1,
/// 2x3, three channels each, ReLU), channel merge, flatten, dense + ReLU.
/// etpp2 returns the flattened input unchanged.
Var spatial_forward(Tape& t, const Network& net, const NetVars& v, Var grid_map);

struct TemporalOut {
    Var hidden;  ///< [h]
    Var g_hat;   ///< [m]
};

/// One recurrence step on [D; features] followed by the affine output layer.
/// etpp1 ignores h_prev.
TemporalOut temporal_step(Tape& t, const Network& net, const NetVars& v, Var d, Var features, Var h_prev);

/// Refine stack on selected seats:
///   X = [g_hat[grid_index[i]], static_rows[i]]      [r x 4]
///   P = relu(X W_p1 + b_p1) W_p2 + b_p2            [r x 1]
/// static_rows holds the standardized (dte, row, col) of each selected seat.
Var refine_forward(Tape& t, const NetVars& v, Var g_hat, std::vector<std::size_t> grid_index,
                   const Array& static_rows);

/// Seats (and their grids) whose refined prices a forward pass should produce
/// at one bin.
struct RefineRequest {
    std::vector<std::size_t> grid_index;
    Array static_rows;  ///< [r x 3]; r == 0 skips the bin
};

struct ForwardResult {
    std::vector<Var> g_hat;  ///< per bin, [m]
    std::vector<Var> p_hat;  ///< per bin, [r x 1]; invalid when r == 0
};

/// Runs bins j = 1..L in calendar order from h_0 = 0.
///   input:    [m x L] imputed grid prices
///   features: [q] scaled event features
///   refine:   one request per bin
ForwardResult forward_event(Tape& t, const Network& net, const NetVars& v, const Array& input, const Array& features,
                            std::span<const RefineRequest> refine);

/// A prediction with its target and availability mask, all the same shape.
struct MaskedTarget {
    Var pred;
    Array target;
    Array mask;
};

/// alpha * sum(grid masked SSE) + beta * sum(seat masked SSE). A term whose
/// weight is 0 is not recorded at all.
Var bilevel_loss(Tape& t, std::span<const MaskedTarget> grid, std::span<const MaskedTarget> seat, double alpha,
                 double beta);

}  // namespace etpp::model
