// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "etpp/numerics/array.hpp"
#include "etpp/numerics/tape.hpp"

namespace etpp::numerics {

// Elementwise.
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double factor);
Var one_minus(Tape& t, Var a);
Var relu(Tape& t, Var a);
Var tanh(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);

/// W [out x in] times x [in].
Var matvec(Tape& t, Var w, Var x);
/// W x + b.
Var dense(Tape& t, Var w, Var x, Var b);
/// A [n x k] times B [k x p].
Var matmul(Tape& t, Var a, Var b);
/// X [n x p] plus b [p] broadcast over rows.
Var add_row_bias(Tape& t, Var x, Var b);

/// Zero-padded "same" cross-correlation.
///   input   [rows x cols x in_ch]
///   kernels [kh x kw x in_ch x out_ch]
///   bias    [out_ch]
/// Padding before is ceil((k-1)/2), after is floor((k-1)/2), per axis.
Var conv2d(Tape& t, Var input, Var kernels, Var bias);

/// Mean over the trailing channel axis: [rows x cols x ch] -> [rows x cols].
Var channel_mean(Tape& t, Var input);
/// Sum over the trailing channel axis: [rows x cols x ch] -> [rows x cols].
Var channel_sum(Tape& t, Var input);

/// Same data, new shape.
Var reshape(Tape& t, Var a, Shape shape);
/// 1-D concatenation [a; b].
Var concat(Tape& t, Var a, Var b);
/// out[i] = x[index[i]] for a 1-D x.
Var gather(Tape& t, Var x, std::vector<std::size_t> index);
/// Column-wise stack of a 1-D column [n] and a matrix [n x k] -> [n x (1+k)].
Var prepend_column(Tape& t, Var column, Var rest);
/// Rows of a matrix [n x k] selected by index -> [r x k].
Var select_rows(Tape& t, Var x, std::vector<std::size_t> rows);

/// sum(mask * (target - pred)^2). Only pred is differentiated; entries with
/// mask 0 are skipped entirely, so their target and pred values never enter
/// the value or the gradient.
Var masked_sse(Tape& t, Var pred, const Array& target, const Array& mask);

/// Sum of scalars, accumulated in the order given.
Var sum(Tape& t, std::span<const Var> scalars);

enum class GruActivation {
    kStandard,      ///< gates sigmoid, candidate tanh
    kPaperLiteral,  ///< gates tanh, candidate sigmoid
};

std::string_view to_string(GruActivation mode);
GruActivation parse_gru_activation(std::string_view text);

struct GruWeights {
    Var w_z, w_r, w_h;  // [h x d]
    Var u_z, u_r, u_h;  // [h x h]
    Var b_z, b_r, b_h;  // [h]
};

/// One GRU step:
///   z = gate(W_z x + U_z h + b_z)
///   r = gate(W_r x + U_r h + b_r)
///   h' = (1 - z) * h + z * cand(W_h x + U_h (r * h) + b_h)
Var gru_cell(Tape& t, Var x, Var h_prev, const GruWeights& w, GruActivation mode);

}  // namespace etpp::numerics
