// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/numerics/ops.hpp"

#include <cmath>
#include <string>

#include "etpp/error.hpp"

namespace etpp::numerics {
namespace {

void require_same_shape(const Tape& t, Var a, Var b, std::string_view op) {
    if (t.value(a).shape() != t.value(b).shape()) {
        fail(ErrorKind::kShape, std::string(op) + ": shape mismatch " + shape_string(t.value(a).shape()) + " vs " +
                                    shape_string(t.value(b).shape()));
    }
}

void require_rank(const Tape& t, Var a, std::size_t rank, std::string_view op, std::string_view what) {
    if (t.value(a).rank() != rank) {
        fail(ErrorKind::kShape, std::string(op) + ": " + std::string(what) + " must have rank " +
                                    std::to_string(rank) + ", got " + shape_string(t.value(a).shape()));
    }
}

template <typename Fwd, typename Deriv>
Var unary(Tape& t, Var a, Fwd fwd, Deriv deriv) {
    const Array& x = t.value(a);
    Array out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
    return t.record(std::move(out), {a}, [a, deriv](Tape& tape, const Array& g) {
        const Array& x = tape.value(a);
        Array& ga = tape.accumulator(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i]);
    });
}

double logistic(double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

}  // namespace

Var add(Tape& t, Var a, Var b) {
    require_same_shape(t, a, b, "add");
    const Array& x = t.value(a);
    const Array& y = t.value(b);
    Array out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    return t.record(std::move(out), {a, b}, [a, b](Tape& tape, const Array& g) {
        if (tape.requires_grad(a)) {
            Array& ga = tape.accumulator(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (tape.requires_grad(b)) {
            Array& gb = tape.accumulator(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
    });
}

Var sub(Tape& t, Var a, Var b) {
    require_same_shape(t, a, b, "sub");
    const Array& x = t.value(a);
    const Array& y = t.value(b);
    Array out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
    return t.record(std::move(out), {a, b}, [a, b](Tape& tape, const Array& g) {
        if (tape.requires_grad(a)) {
            Array& ga = tape.accumulator(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (tape.requires_grad(b)) {
            Array& gb = tape.accumulator(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Var mul(Tape& t, Var a, Var b) {
    require_same_shape(t, a, b, "mul");
    const Array& x = t.value(a);
    const Array& y = t.value(b);
    Array out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
    return t.record(std::move(out), {a, b}, [a, b](Tape& tape, const Array& g) {
        const Array& x = tape.value(a);
        const Array& y = tape.value(b);
        if (tape.requires_grad(a)) {
            Array& ga = tape.accumulator(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
        }
        if (tape.requires_grad(b)) {
            Array& gb = tape.accumulator(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
        }
    });
}

Var scale(Tape& t, Var a, double factor) {
    return unary(t, a, [factor](double v) { return factor * v; }, [factor](double) { return factor; });
}

Var one_minus(Tape& t, Var a) {
    return unary(t, a, [](double v) { return 1.0 - v; }, [](double) { return -1.0; });
}

Var relu(Tape& t, Var a) {
    return unary(t, a, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Tape& t, Var a) {
    return unary(
        t, a, [](double v) { return std::tanh(v); },
        [](double v) {
            const double th = std::tanh(v);
            return 1.0 - th * th;
        });
}

Var sigmoid(Tape& t, Var a) {
    return unary(t, a, logistic, [](double v) {
        const double s = logistic(v);
        return s * (1.0 - s);
    });
}

Var matvec(Tape& t, Var w, Var x) {
    require_rank(t, w, 2, "matvec", "weights");
    require_rank(t, x, 1, "matvec", "input");
    const Array& W = t.value(w);
    const Array& X = t.value(x);
    const std::size_t rows = W.dim(0);
    const std::size_t cols = W.dim(1);
    if (cols != X.size()) {
        fail(ErrorKind::kShape, "matvec: weight columns " + std::to_string(cols) + " != input length " +
                                    std::to_string(X.size()));
    }
    Array out({rows});
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* wr = W.data().data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * X[c];
        out[r] = acc;
    }
    return t.record(std::move(out), {w, x}, [w, x, rows, cols](Tape& tape, const Array& g) {
        const Array& W = tape.value(w);
        const Array& X = tape.value(x);
        if (tape.requires_grad(w)) {
            Array& gw = tape.accumulator(w);
            for (std::size_t r = 0; r < rows; ++r) {
                double* gr = gw.data().data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) gr[c] += g[r] * X[c];
            }
        }
        if (tape.requires_grad(x)) {
            Array& gx = tape.accumulator(x);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* wr = W.data().data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) gx[c] += g[r] * wr[c];
            }
        }
    });
}

Var dense(Tape& t, Var w, Var x, Var b) {
    const Var wx = matvec(t, w, x);
    if (t.value(b).shape() != t.value(wx).shape()) {
        fail(ErrorKind::kShape, "dense: bias " + shape_string(t.value(b).shape()) + " does not match output " +
                                    shape_string(t.value(wx).shape()));
    }
    return add(t, wx, b);
}

Var matmul(Tape& t, Var a, Var b) {
    require_rank(t, a, 2, "matmul", "left operand");
    require_rank(t, b, 2, "matmul", "right operand");
    const Array& A = t.value(a);
    const Array& B = t.value(b);
    const std::size_t n = A.dim(0);
    const std::size_t k = A.dim(1);
    const std::size_t p = B.dim(1);
    if (B.dim(0) != k) {
        fail(ErrorKind::kShape, "matmul: inner dimensions " + std::to_string(k) + " and " +
                                    std::to_string(B.dim(0)) + " differ");
    }
    Array out({n, p});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            const double av = A.at(i, l);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < p; ++j) out.at(i, j) += av * B.at(l, j);
        }
    }
    return t.record(std::move(out), {a, b}, [a, b, n, k, p](Tape& tape, const Array& g) {
        const Array& A = tape.value(a);
        const Array& B = tape.value(b);
        if (tape.requires_grad(a)) {
            Array& ga = tape.accumulator(a);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t l = 0; l < k; ++l) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < p; ++j) acc += g.at(i, j) * B.at(l, j);
                    ga.at(i, l) += acc;
                }
        }
        if (tape.requires_grad(b)) {
            Array& gb = tape.accumulator(b);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t l = 0; l < k; ++l) {
                    const double av = A.at(i, l);
                    for (std::size_t j = 0; j < p; ++j) gb.at(l, j) += av * g.at(i, j);
                }
        }
    });
}

Var add_row_bias(Tape& t, Var x, Var b) {
    require_rank(t, x, 2, "add_row_bias", "input");
    require_rank(t, b, 1, "add_row_bias", "bias");
    const Array& X = t.value(x);
    const Array& B = t.value(b);
    const std::size_t n = X.dim(0);
    const std::size_t p = X.dim(1);
    if (B.size() != p) {
        fail(ErrorKind::kShape, "add_row_bias: bias length " + std::to_string(B.size()) + " != columns " +
                                    std::to_string(p));
    }
    Array out = X;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) out.at(i, j) += B[j];
    return t.record(std::move(out), {x, b}, [x, b, n, p](Tape& tape, const Array& g) {
        if (tape.requires_grad(x)) {
            Array& gx = tape.accumulator(x);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (tape.requires_grad(b)) {
            Array& gb = tape.accumulator(b);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < p; ++j) gb[j] += g.at(i, j);
        }
    });
}

Var conv2d(Tape& t, Var input, Var kernels, Var bias) {
    require_rank(t, input, 3, "conv2d", "input");
    require_rank(t, kernels, 4, "conv2d", "kernels");
    require_rank(t, bias, 1, "conv2d", "bias");
    const Array& X = t.value(input);
    const Array& K = t.value(kernels);
    const Array& B = t.value(bias);
    const std::size_t rows = X.dim(0), cols = X.dim(1), in_ch = X.dim(2);
    const std::size_t kh = K.dim(0), kw = K.dim(1), out_ch = K.dim(3);
    if (K.dim(2) != in_ch) {
        fail(ErrorKind::kShape, "conv2d: kernel in_ch " + std::to_string(K.dim(2)) + " != input channels " +
                                    std::to_string(in_ch));
    }
    if (B.size() != out_ch) {
        fail(ErrorKind::kShape, "conv2d: bias length " + std::to_string(B.size()) + " != out_ch " +
                                    std::to_string(out_ch));
    }
    if (kh == 0 || kw == 0) fail(ErrorKind::kShape, "conv2d: kernel height and width must be positive");
    const std::size_t pad_r = kh / 2;  // ceil((kh - 1) / 2)
    const std::size_t pad_c = kw / 2;
    if (kh > rows + kh - 1 || kw > cols + kw - 1 || rows == 0 || cols == 0) {
        fail(ErrorKind::kShape, "conv2d: empty input map " + shape_string(X.shape()));
    }

    // Index helpers for [r][c][ch] and [i][j][ci][co].
    const auto xi = [cols, in_ch](std::size_t r, std::size_t c, std::size_t ch) { return (r * cols + c) * in_ch + ch; };
    const auto ki = [kw, in_ch, out_ch](std::size_t i, std::size_t j, std::size_t ci, std::size_t co) {
        return ((i * kw + j) * in_ch + ci) * out_ch + co;
    };
    const auto oi = [cols, out_ch](std::size_t r, std::size_t c, std::size_t co) { return (r * cols + c) * out_ch + co; };

    Array out({rows, cols, out_ch});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            for (std::size_t co = 0; co < out_ch; ++co) {
                double acc = B[co];
                for (std::size_t i = 0; i < kh; ++i) {
                    const std::ptrdiff_t rr = static_cast<std::ptrdiff_t>(r + i) - static_cast<std::ptrdiff_t>(pad_r);
                    if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(rows)) continue;
                    for (std::size_t j = 0; j < kw; ++j) {
                        const std::ptrdiff_t cc =
                            static_cast<std::ptrdiff_t>(c + j) - static_cast<std::ptrdiff_t>(pad_c);
                        if (cc < 0 || cc >= static_cast<std::ptrdiff_t>(cols)) continue;
                        for (std::size_t ci = 0; ci < in_ch; ++ci)
                            acc += X[xi(rr, cc, ci)] * K[ki(i, j, ci, co)];
                    }
                }
                out[oi(r, c, co)] = acc;
            }

    return t.record(std::move(out), {input, kernels, bias},
                    [=](Tape& tape, const Array& g) {
                        const Array& X = tape.value(input);
                        const Array& K = tape.value(kernels);
                        const bool want_x = tape.requires_grad(input);
                        const bool want_k = tape.requires_grad(kernels);
                        if (tape.requires_grad(bias)) {
                            Array& gb = tape.accumulator(bias);
                            for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < cols; ++c)
                                    for (std::size_t co = 0; co < out_ch; ++co) gb[co] += g[oi(r, c, co)];
                        }
                        if (!want_x && !want_k) return;
                        Array* gx = want_x ? &tape.accumulator(input) : nullptr;
                        Array* gk = want_k ? &tape.accumulator(kernels) : nullptr;
                        for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < cols; ++c)
                                for (std::size_t co = 0; co < out_ch; ++co) {
                                    const double go = g[oi(r, c, co)];
                                    if (go == 0.0) continue;
                                    for (std::size_t i = 0; i < kh; ++i) {
                                        const std::ptrdiff_t rr = static_cast<std::ptrdiff_t>(r + i) -
                                                                  static_cast<std::ptrdiff_t>(pad_r);
                                        if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(rows)) continue;
                                        for (std::size_t j = 0; j < kw; ++j) {
                                            const std::ptrdiff_t cc = static_cast<std::ptrdiff_t>(c + j) -
                                                                      static_cast<std::ptrdiff_t>(pad_c);
                                            if (cc < 0 || cc >= static_cast<std::ptrdiff_t>(cols)) continue;
                                            for (std::size_t ci = 0; ci < in_ch; ++ci) {
                                                if (gx) (*gx)[xi(rr, cc, ci)] += go * K[ki(i, j, ci, co)];
                                                if (gk) (*gk)[ki(i, j, ci, co)] += go * X[xi(rr, cc, ci)];
                                            }
                                        }
                                    }
                                }
                    });
}

namespace {

Var channel_reduce(Tape& t, Var input, bool mean) {
    require_rank(t, input, 3, mean ? "channel_mean" : "channel_sum", "input");
    const Array& X = t.value(input);
    const std::size_t rows = X.dim(0), cols = X.dim(1), ch = X.dim(2);
    if (ch == 0) fail(ErrorKind::kShape, "channel reduction over zero channels");
    const double w = mean ? 1.0 / static_cast<double>(ch) : 1.0;
    Array out({rows, cols});
    for (std::size_t p = 0; p < rows * cols; ++p) {
        double acc = 0.0;
        for (std::size_t k = 0; k < ch; ++k) acc += X[p * ch + k];
        out[p] = acc * w;
    }
    return t.record(std::move(out), {input}, [input, rows, cols, ch, w](Tape& tape, const Array& g) {
        Array& gx = tape.accumulator(input);
        for (std::size_t p = 0; p < rows * cols; ++p)
            for (std::size_t k = 0; k < ch; ++k) gx[p * ch + k] += g[p] * w;
    });
}

}  // namespace

Var channel_mean(Tape& t, Var input) { return channel_reduce(t, input, true); }
Var channel_sum(Tape& t, Var input) { return channel_reduce(t, input, false); }

Var reshape(Tape& t, Var a, Shape shape) {
    Array out = t.value(a).reshaped(std::move(shape));
    return t.record(std::move(out), {a}, [a](Tape& tape, const Array& g) {
        Array& ga = tape.accumulator(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Var concat(Tape& t, Var a, Var b) {
    require_rank(t, a, 1, "concat", "first operand");
    require_rank(t, b, 1, "concat", "second operand");
    const Array& x = t.value(a);
    const Array& y = t.value(b);
    const std::size_t na = x.size();
    std::vector<double> data(x.values());
    data.insert(data.end(), y.values().begin(), y.values().end());
    return t.record(Array::vector(std::move(data)), {a, b}, [a, b, na](Tape& tape, const Array& g) {
        if (tape.requires_grad(a)) {
            Array& ga = tape.accumulator(a);
            for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
        }
        if (tape.requires_grad(b)) {
            Array& gb = tape.accumulator(b);
            for (std::size_t i = na; i < g.size(); ++i) gb[i - na] += g[i];
        }
    });
}

Var gather(Tape& t, Var x, std::vector<std::size_t> index) {
    require_rank(t, x, 1, "gather", "input");
    const Array& X = t.value(x);
    Array out({index.size()});
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= X.size()) {
            fail(ErrorKind::kShape, "gather: index " + std::to_string(index[i]) + " out of range " +
                                        std::to_string(X.size()));
        }
        out[i] = X[index[i]];
    }
    return t.record(std::move(out), {x}, [x, index = std::move(index)](Tape& tape, const Array& g) {
        Array& gx = tape.accumulator(x);
        for (std::size_t i = 0; i < index.size(); ++i) gx[index[i]] += g[i];
    });
}

Var prepend_column(Tape& t, Var column, Var rest) {
    require_rank(t, column, 1, "prepend_column", "column");
    require_rank(t, rest, 2, "prepend_column", "matrix");
    const Array& C = t.value(column);
    const Array& R = t.value(rest);
    const std::size_t n = C.size();
    const std::size_t k = R.dim(1);
    if (R.dim(0) != n) {
        fail(ErrorKind::kShape, "prepend_column: column length " + std::to_string(n) + " != matrix rows " +
                                    std::to_string(R.dim(0)));
    }
    Array out({n, k + 1});
    for (std::size_t i = 0; i < n; ++i) {
        out.at(i, 0) = C[i];
        for (std::size_t j = 0; j < k; ++j) out.at(i, j + 1) = R.at(i, j);
    }
    return t.record(std::move(out), {column, rest}, [column, rest, n, k](Tape& tape, const Array& g) {
        if (tape.requires_grad(column)) {
            Array& gc = tape.accumulator(column);
            for (std::size_t i = 0; i < n; ++i) gc[i] += g.at(i, 0);
        }
        if (tape.requires_grad(rest)) {
            Array& gr = tape.accumulator(rest);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < k; ++j) gr.at(i, j) += g.at(i, j + 1);
        }
    });
}

Var select_rows(Tape& t, Var x, std::vector<std::size_t> rows) {
    require_rank(t, x, 2, "select_rows", "input");
    const Array& X = t.value(x);
    const std::size_t k = X.dim(1);
    Array out({rows.size(), k});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= X.dim(0)) {
            fail(ErrorKind::kShape, "select_rows: row " + std::to_string(rows[i]) + " out of range " +
                                        std::to_string(X.dim(0)));
        }
        for (std::size_t j = 0; j < k; ++j) out.at(i, j) = X.at(rows[i], j);
    }
    return t.record(std::move(out), {x}, [x, k, rows = std::move(rows)](Tape& tape, const Array& g) {
        Array& gx = tape.accumulator(x);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < k; ++j) gx.at(rows[i], j) += g.at(i, j);
    });
}

Var masked_sse(Tape& t, Var pred, const Array& target, const Array& mask) {
    const Array& P = t.value(pred);
    if (P.shape() != target.shape() || P.shape() != mask.shape()) {
        fail(ErrorKind::kShape, "masked_sse: shapes differ (pred " + shape_string(P.shape()) + ", target " +
                                    shape_string(target.shape()) + ", mask " + shape_string(mask.shape()) + ")");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) {
        if (mask[i] == 0.0) continue;
        if (mask[i] != 1.0) {
            fail(ErrorKind::kInvalidArgument, "masked_sse: mask entry " + std::to_string(i) + " is not 0 or 1");
        }
        const double d = target[i] - P[i];
        acc += d * d;
    }
    return t.record(Array::scalar(acc), {pred}, [pred, target, mask](Tape& tape, const Array& g) {
        const Array& P = tape.value(pred);
        Array& gp = tape.accumulator(pred);
        for (std::size_t i = 0; i < P.size(); ++i) {
            if (mask[i] == 0.0) continue;
            gp[i] += -2.0 * (target[i] - P[i]) * g[0];
        }
    });
}

Var sum(Tape& t, std::span<const Var> scalars) {
    double acc = 0.0;
    for (const Var v : scalars) {
        if (t.value(v).size() != 1) fail(ErrorKind::kShape, "sum: operands must be scalars");
        acc += t.value(v)[0];
    }
    std::vector<Var> inputs(scalars.begin(), scalars.end());
    return t.record(Array::scalar(acc), inputs, [inputs](Tape& tape, const Array& g) {
        for (const Var v : inputs) {
            if (tape.requires_grad(v)) tape.accumulator(v)[0] += g[0];
        }
    });
}

std::string_view to_string(GruActivation mode) {
    return mode == GruActivation::kStandard ? "standard" : "paper-literal";
}

GruActivation parse_gru_activation(std::string_view text) {
    if (text == "standard") return GruActivation::kStandard;
    if (text == "paper-literal") return GruActivation::kPaperLiteral;
    fail(ErrorKind::kInvalidArgument, "unknown GRU activation mode '" + std::string(text) + "'");
}

Var gru_cell(Tape& t, Var x, Var h_prev, const GruWeights& w, GruActivation mode) {
    const auto gate = [&t, mode](Var v) { return mode == GruActivation::kStandard ? sigmoid(t, v) : tanh(t, v); };
    const auto candidate = [&t, mode](Var v) {
        return mode == GruActivation::kStandard ? tanh(t, v) : sigmoid(t, v);
    };
    const std::size_t h = t.value(h_prev).size();
    if (t.value(w.u_z).dim(0) != h || t.value(w.b_z).size() != h) {
        fail(ErrorKind::kShape, "gru_cell: hidden size " + std::to_string(h) + " does not match weights " +
                                    shape_string(t.value(w.u_z).shape()));
    }

    const Var z = gate(add(t, add(t, matvec(t, w.w_z, x), matvec(t, w.u_z, h_prev)), w.b_z));
    const Var r = gate(add(t, add(t, matvec(t, w.w_r, x), matvec(t, w.u_r, h_prev)), w.b_r));
    const Var reset_h = mul(t, r, h_prev);
    const Var cand = candidate(add(t, add(t, matvec(t, w.w_h, x), matvec(t, w.u_h, reset_h)), w.b_h));
    return add(t, mul(t, one_minus(t, z), h_prev), mul(t, z, cand));
}

}  // namespace etpp::numerics
