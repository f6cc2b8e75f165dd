// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "etpp/error.hpp"
#include "etpp/numerics/adam.hpp"
#include "etpp/numerics/grad_check.hpp"
#include "etpp/numerics/ops.hpp"

using namespace etpp::numerics;

namespace {

Array random_array(std::mt19937_64& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Array a(std::move(shape));
    for (double& v : a.data()) v = u(rng);
    return a;
}

std::size_t random_dim(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Reduces any op output to a scalar through a fixed random quadratic so that
// every output entry gets a distinct upstream gradient.
Var scalar_head(Tape& t, Var out, std::mt19937_64& seed_rng) {
    std::mt19937_64 rng(seed_rng());
    const Array& v = t.value(out);
    return masked_sse(t, out, random_array(rng, v.shape()), Array(v.shape(), 1.0));
}

// Brute-force "same" cross-correlation over an explicitly padded copy.
Array conv_oracle(const Array& x, const Array& k, const Array& b) {
    const std::size_t rows = x.dim(0), cols = x.dim(1), in_ch = x.dim(2);
    const std::size_t kh = k.dim(0), kw = k.dim(1), out_ch = k.dim(3);
    const std::size_t before_r = (kh - 1 + 1) / 2, before_c = (kw - 1 + 1) / 2;
    const std::size_t after_r = (kh - 1) / 2, after_c = (kw - 1) / 2;
    const std::size_t pr = rows + before_r + after_r, pc = cols + before_c + after_c;
    std::vector<double> padded(pr * pc * in_ch, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            for (std::size_t ch = 0; ch < in_ch; ++ch)
                padded[((r + before_r) * pc + (c + before_c)) * in_ch + ch] = x[(r * cols + c) * in_ch + ch];
    Array out({rows, cols, out_ch});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            for (std::size_t o = 0; o < out_ch; ++o) {
                double acc = b[o];
                for (std::size_t i = 0; i < kh; ++i)
                    for (std::size_t j = 0; j < kw; ++j)
                        for (std::size_t ch = 0; ch < in_ch; ++ch)
                            acc += padded[((r + i) * pc + (c + j)) * in_ch + ch] *
                                   k[((i * kw + j) * in_ch + ch) * out_ch + o];
                out[(r * cols + c) * out_ch + o] = acc;
            }
    return out;
}

}  // namespace

TEST_SUITE("conv2d") {
    TEST_CASE("identity 1x3 kernel returns the input map") {
        Tape t;
        const Array map({3, 4, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
        const Var x = t.constant(map);
        const Var k = t.constant(Array({1, 3, 1, 1}, {0, 1, 0}));
        const Var b = t.constant(Array({1}));
        CHECK(t.value(conv2d(t, x, k, b)) == map);
    }

    TEST_CASE("row [1,2,3] with box kernel and zero padding") {
        Tape t;
        const Var x = t.constant(Array({1, 3, 1}, {1, 2, 3}));
        const Var k = t.constant(Array({1, 3, 1, 1}, {1, 1, 1}));
        const Var out = conv2d(t, x, k, t.constant(Array({1})));
        CHECK(t.value(out).values() == std::vector<double>{3, 6, 5});
    }

    TEST_CASE("2x1 kernel on 4x4 pads one row before and none after") {
        std::mt19937_64 rng(3);
        Tape t;
        const Array map = random_array(rng, {4, 4, 1});
        const Array kern({2, 1, 1, 1}, {1.0, 10.0});
        const Var out = conv2d(t, t.constant(map), t.constant(kern), t.constant(Array({1})));
        REQUIRE(t.value(out).shape() == Shape{4, 4, 1});
        // Row 0 sees the zero pad above it, so only the second tap contributes.
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(t.value(out)[c] == doctest::Approx(10.0 * map[c]));
            CHECK(t.value(out)[4 + c] == doctest::Approx(map[c] + 10.0 * map[4 + c]));
        }
    }

    TEST_CASE("matches the padded brute-force oracle and preserves spatial dims") {
        std::mt19937_64 rng(11);
        const std::vector<std::pair<std::size_t, std::size_t>> kernels = {{1, 3}, {2, 1}, {2, 3}, {1, 1}, {3, 3}};
        for (int trial = 0; trial < 50; ++trial) {
            for (const auto [kh, kw] : kernels) {
                const std::size_t rows = random_dim(rng, 1, 5), cols = random_dim(rng, 1, 5);
                const std::size_t in_ch = random_dim(rng, 1, 3), out_ch = random_dim(rng, 1, 3);
                const Array x = random_array(rng, {rows, cols, in_ch});
                const Array k = random_array(rng, {kh, kw, in_ch, out_ch});
                const Array b = random_array(rng, {out_ch});
                Tape t;
                const Var out = conv2d(t, t.constant(x), t.constant(k), t.constant(b));
                REQUIRE(t.value(out).shape() == Shape{rows, cols, out_ch});
                const Array expected = conv_oracle(x, k, b);
                for (std::size_t i = 0; i < expected.size(); ++i)
                    CHECK(t.value(out)[i] == doctest::Approx(expected[i]).epsilon(1e-12));
            }
        }
    }

    TEST_CASE("channel mismatch names the dimension") {
        Tape t;
        const Var x = t.constant(Array({2, 2, 2}));
        const Var k = t.constant(Array({1, 3, 1, 1}));
        CHECK_THROWS_WITH_AS(conv2d(t, x, k, t.constant(Array({1}))), doctest::Contains("in_ch"), etpp::Error);
    }
}

TEST_SUITE("dense and activations") {
    TEST_CASE("identity weights leave x unchanged") {
        Tape t;
        const Var w = t.constant(Array::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
        const Var x = t.constant(Array::vector({0.5, -2.0, 7.0}));
        const Var y = dense(t, w, x, t.constant(Array({3})));
        CHECK(t.value(y) == t.value(x));
    }

    TEST_CASE("hand arithmetic") {
        Tape t;
        const Var out = dense(t, t.constant(Array::matrix(1, 2, {1, 1})), t.constant(Array::vector({2, 3})),
                              t.constant(Array::vector({1})));
        CHECK(t.value(out)[0] == 6.0);
    }

    TEST_CASE("gradient of summed output w.r.t. W is ones outer x") {
        Tape t;
        const Var w = t.leaf(Array::matrix(2, 3, {0.1, 0.2, 0.3, -0.4, 0.5, -0.6}));
        const Var x = t.constant(Array::vector({2, -1, 4}));
        const Var y = dense(t, w, x, t.constant(Array({2})));
        // Linear head y0 + y1.
        const Var total = sum(t, std::vector<Var>{reshape(t, gather(t, y, {0}), {1}), reshape(t, gather(t, y, {1}), {1})});
        t.backward(total);
        CHECK(t.grad(w).values() == std::vector<double>{2, -1, 4, 2, -1, 4});
    }

    TEST_CASE("dimension mismatch rejected") {
        Tape t;
        CHECK_THROWS_AS(dense(t, t.constant(Array({2, 3})), t.constant(Array({2})), t.constant(Array({2}))),
                        etpp::Error);
    }

    TEST_CASE("relu, tanh, sigmoid values") {
        Tape t;
        CHECK(t.value(relu(t, t.constant(Array::vector({-1, 0, 2})))).values() == std::vector<double>{0, 0, 2});
        CHECK(t.value(tanh(t, t.constant(Array::scalar(0))))[0] == 0.0);
        CHECK(t.value(sigmoid(t, t.constant(Array::scalar(0))))[0] == 0.5);
    }

    TEST_CASE("sigmoid derivative at 0 is 0.25") {
        Tape t;
        const Var x = t.leaf(Array::scalar(0.0));
        t.backward(sigmoid(t, x));
        CHECK(t.grad(x)[0] == 0.25);
    }
}

TEST_SUITE("gru_cell") {
    GruWeights zero_weights(Tape& t, std::size_t h, std::size_t d) {
        GruWeights w;
        w.w_z = t.leaf(Array({h, d}));
        w.w_r = t.leaf(Array({h, d}));
        w.w_h = t.leaf(Array({h, d}));
        w.u_z = t.leaf(Array({h, h}));
        w.u_r = t.leaf(Array({h, h}));
        w.u_h = t.leaf(Array({h, h}));
        w.b_z = t.leaf(Array({h}));
        w.b_r = t.leaf(Array({h}));
        w.b_h = t.leaf(Array({h}));
        return w;
    }

    TEST_CASE("zero weights, standard mode halves the state") {
        Tape t;
        const GruWeights w = zero_weights(t, 3, 2);
        const Var h = t.constant(Array::vector({1.0, -4.0, 0.25}));
        const Var out = gru_cell(t, t.constant(Array::vector({9, 9})), h, w, GruActivation::kStandard);
        CHECK(t.value(out).values() == std::vector<double>{0.5, -2.0, 0.125});
    }

    TEST_CASE("zero weights, paper-literal mode keeps the state") {
        Tape t;
        const GruWeights w = zero_weights(t, 3, 2);
        const Var h = t.constant(Array::vector({1.0, -4.0, 0.25}));
        const Var out = gru_cell(t, t.constant(Array::vector({9, 9})), h, w, GruActivation::kPaperLiteral);
        CHECK(t.value(out) == t.value(h));
    }

    TEST_CASE("zero state and zero weights stay zero") {
        Tape t;
        const GruWeights w = zero_weights(t, 4, 3);
        const Var out =
            gru_cell(t, t.constant(Array::vector({1, 2, 3})), t.constant(Array({4})), w, GruActivation::kStandard);
        CHECK(t.value(out) == Array({4}));
    }

    TEST_CASE("standard mode bounds |h'_i| by max(|h_i|, 1)") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t h = random_dim(rng, 1, 6), d = random_dim(rng, 1, 6);
            Tape t;
            GruWeights w;
            w.w_z = t.leaf(random_array(rng, {h, d}, -3, 3));
            w.w_r = t.leaf(random_array(rng, {h, d}, -3, 3));
            w.w_h = t.leaf(random_array(rng, {h, d}, -3, 3));
            w.u_z = t.leaf(random_array(rng, {h, h}, -3, 3));
            w.u_r = t.leaf(random_array(rng, {h, h}, -3, 3));
            w.u_h = t.leaf(random_array(rng, {h, h}, -3, 3));
            w.b_z = t.leaf(random_array(rng, {h}, -3, 3));
            w.b_r = t.leaf(random_array(rng, {h}, -3, 3));
            w.b_h = t.leaf(random_array(rng, {h}, -3, 3));
            const Array prev = random_array(rng, {h}, -5, 5);
            const Var out = gru_cell(t, t.constant(random_array(rng, {d}, -5, 5)), t.constant(prev), w,
                                     GruActivation::kStandard);
            for (std::size_t i = 0; i < h; ++i) CHECK(std::abs(t.value(out)[i]) <= std::max(std::abs(prev[i]), 1.0));
        }
    }

    TEST_CASE("hidden size mismatch rejected") {
        Tape t;
        const GruWeights w = zero_weights(t, 3, 2);
        CHECK_THROWS_AS(gru_cell(t, t.constant(Array({2})), t.constant(Array({4})), w, GruActivation::kStandard),
                        etpp::Error);
    }
}

TEST_SUITE("masked_sse") {
    TEST_CASE("all-zero mask gives zero value and zero gradient") {
        Tape t;
        const Var p = t.leaf(Array::vector({1, 2, 3}));
        const Var loss = masked_sse(t, p, Array::vector({7, 8, 9}), Array({3}));
        t.backward(loss);
        CHECK(t.value(loss)[0] == 0.0);
        CHECK(t.grad(p) == Array({3}));
    }

    TEST_CASE("hand cases") {
        Tape t;
        CHECK(t.value(masked_sse(t, t.constant(Array::vector({1, 2})), Array::vector({2, 4}), Array::vector({1, 0})))[0] ==
              1.0);
        CHECK(t.value(masked_sse(t, t.constant(Array::vector({0, 0})), Array::vector({1, -1}), Array::vector({1, 1})))[0] ==
              2.0);
    }

    TEST_CASE("gradient is -2 mask (target - pred)") {
        Tape t;
        const Var p = t.leaf(Array::vector({1, 2, 3}));
        t.backward(masked_sse(t, p, Array::vector({2, 0, 5}), Array::vector({1, 1, 0})));
        CHECK(t.grad(p).values() == std::vector<double>{-2.0, 4.0, 0.0});
    }

    TEST_CASE("values at masked positions never matter, bit for bit") {
        std::mt19937_64 rng(9);
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t n = random_dim(rng, 1, 20);
            const Array pred = random_array(rng, {n});
            Array target = random_array(rng, {n});
            Array mask({n});
            for (double& m : mask.data()) m = (rng() % 2) ? 1.0 : 0.0;
            Tape a;
            const Var pa = a.leaf(pred);
            const Var la = masked_sse(a, pa, target, mask);
            a.backward(la);

            Array pred2 = pred;
            for (std::size_t i = 0; i < n; ++i) {
                if (mask[i] == 0.0) {
                    target[i] = std::nan("");
                    pred2[i] = 1e300;
                }
            }
            Tape b;
            const Var pb = b.leaf(pred2);
            const Var lb = masked_sse(b, pb, target, mask);
            b.backward(lb);
            CHECK(a.value(la)[0] == b.value(lb)[0]);
            for (std::size_t i = 0; i < n; ++i)
                if (mask[i] == 1.0) CHECK(a.grad(pa)[i] == b.grad(pb)[i]);
        }
    }

    TEST_CASE("shape mismatch and non-binary masks rejected") {
        Tape t;
        const Var p = t.leaf(Array({2}));
        CHECK_THROWS_AS(masked_sse(t, p, Array({3}), Array({3})), etpp::Error);
        CHECK_THROWS_AS(masked_sse(t, p, Array({2}), Array::vector({0.5, 1})), etpp::Error);
    }
}

TEST_SUITE("adam") {
    TEST_CASE("first step from zero moments") {
        ParamSet params;
        params.add("w", Array::scalar(0.0));
        AdamState state = AdamState::zeros_like(params, {1e-3, 0.9, 0.999, 1e-8});
        adam_step(params, {Array::scalar(1.0)}, state);
        // m_hat = v_hat = 1, so the step is lr / (1 + eps).
        CHECK(state.step == 1);
        CHECK(params.get("w")[0] == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-14));
        CHECK(std::abs(params.get("w")[0] - (-9.99999995e-4)) < 1e-11);
    }

    TEST_CASE("zero gradient with zero moments leaves params unchanged") {
        ParamSet params;
        params.add("w", Array::vector({0.3, -0.7}));
        const ParamSet before = params;
        AdamState state = AdamState::zeros_like(params, {});
        adam_step(params, {Array({2})}, state);
        CHECK(params == before);
    }

    TEST_CASE("identical inputs give bitwise identical outputs") {
        std::mt19937_64 rng(1);
        ParamSet a;
        a.add("w", random_array(rng, {3, 4}));
        a.add("b", random_array(rng, {4}));
        ParamSet b = a;
        AdamState sa = AdamState::zeros_like(a, {1e-2});
        AdamState sb = AdamState::zeros_like(b, {1e-2});
        const std::vector<Array> grads = {random_array(rng, {3, 4}), random_array(rng, {4})};
        for (int i = 0; i < 5; ++i) {
            adam_step(a, grads, sa);
            adam_step(b, grads, sb);
        }
        CHECK(a == b);
        CHECK(sa.first_moment == sb.first_moment);
        CHECK(sa.second_moment == sb.second_moment);
    }

    TEST_CASE("non-finite gradient rejected with parameter name") {
        ParamSet params;
        params.add("gru.w_z", Array({2}));
        const ParamSet before = params;
        AdamState state = AdamState::zeros_like(params, {});
        CHECK_THROWS_WITH_AS(adam_step(params, {Array::vector({1.0, INFINITY})}, state),
                             doctest::Contains("gru.w_z"), etpp::Error);
        CHECK(state.step == 0);
        CHECK(params == before);
    }
}

TEST_SUITE("gradient checks") {
    TEST_CASE("dense-only graph") {
        std::mt19937_64 rng(2);
        ParamSet params;
        params.add("w", random_array(rng, {3, 4}));
        params.add("b", random_array(rng, {3}));
        const Array x = random_array(rng, {4});
        const Array target = random_array(rng, {3});
        const GraphBuilder build = [&](Tape& t, const BoundParams& p) {
            return masked_sse(t, dense(t, p[0], t.constant(x), p[1]), target, Array({3}, 1.0));
        };
        const GradCheckReport report = grad_check(build, params);
        CHECK(report.max_relative_error < 1e-6);
    }

    TEST_CASE("masked entries have exactly zero analytic gradient") {
        ParamSet params;
        params.add("p", Array::vector({0.3, -1.2, 2.0}));
        const GraphBuilder build = [](Tape& t, const BoundParams& p) {
            return masked_sse(t, p[0], Array::vector({1, 1, 1}), Array::vector({1, 0, 1}));
        };
        Tape t;
        const BoundParams bound = bind(t, params);
        t.backward(build(t, bound));
        CHECK(t.grad(bound[0])[1] == 0.0);
        CHECK(grad_check(build, params).max_relative_error < 1e-6);
    }

    // Every primitive, 100 random shapes and values each.
    TEST_CASE("every primitive matches central differences") {
        std::mt19937_64 rng(42);
        using Case = std::function<Var(Tape&, const BoundParams&, std::mt19937_64&)>;
        struct Primitive {
            const char* name;
            std::function<ParamSet(std::mt19937_64&)> make;
            Case apply;
        };
        const auto vec_pair = [](std::mt19937_64& r) {
            const std::size_t n = random_dim(r, 1, 6);
            ParamSet p;
            p.add("a", random_array(r, {n}, -2, 2));
            p.add("b", random_array(r, {n}, -2, 2));
            return p;
        };
        const std::vector<Primitive> primitives = {
            {"add", vec_pair, [](Tape& t, const BoundParams& p, auto& r) { return scalar_head(t, add(t, p[0], p[1]), r); }},
            {"sub", vec_pair, [](Tape& t, const BoundParams& p, auto& r) { return scalar_head(t, sub(t, p[0], p[1]), r); }},
            {"mul", vec_pair, [](Tape& t, const BoundParams& p, auto& r) { return scalar_head(t, mul(t, p[0], p[1]), r); }},
            {"scale", vec_pair, [](Tape& t, const BoundParams& p, auto& r) { return scalar_head(t, scale(t, p[0], -1.7), r); }},
            {"one_minus", vec_pair, [](Tape& t, const BoundParams& p, auto& r) { return scalar_head(t, one_minus(t, p[0]), r); }},
            {"relu", vec_pair, [](Tape& t, const BoundParams& p, auto& r) { return scalar_head(t, relu(t, p[0]), r); }},
            {"tanh", vec_pair, [](Tape& t, const BoundParams& p, auto& r) { return scalar_head(t, tanh(t, p[0]), r); }},
            {"sigmoid", vec_pair, [](Tape& t, const BoundParams& p, auto& r) { return scalar_head(t, sigmoid(t, p[0]), r); }},
            {"concat", vec_pair, [](Tape& t, const BoundParams& p, auto& r) { return scalar_head(t, concat(t, p[0], p[1]), r); }},
            {"gather", vec_pair,
             [](Tape& t, const BoundParams& p, auto& r) {
                 const std::size_t n = t.value(p[0]).size();
                 std::vector<std::size_t> idx;
                 for (std::size_t i = 0; i < 2 * n + 1; ++i) idx.push_back(r() % n);
                 return scalar_head(t, gather(t, p[0], idx), r);
             }},
            {"sum", vec_pair,
             [](Tape& t, const BoundParams& p, auto& r) {
                 const Var a = masked_sse(t, p[0], Array(t.value(p[0]).shape(), 0.5), Array(t.value(p[0]).shape(), 1.0));
                 const Var b = scalar_head(t, p[1], r);
                 return sum(t, std::vector<Var>{a, b, a});
             }},
            {"matvec_dense",
             [](std::mt19937_64& r) {
                 const std::size_t o = random_dim(r, 1, 5), i = random_dim(r, 1, 5);
                 ParamSet p;
                 p.add("w", random_array(r, {o, i}));
                 p.add("x", random_array(r, {i}));
                 p.add("b", random_array(r, {o}));
                 return p;
             },
             [](Tape& t, const BoundParams& p, auto& r) { return scalar_head(t, dense(t, p[0], p[1], p[2]), r); }},
            {"matmul_bias",
             [](std::mt19937_64& r) {
                 const std::size_t n = random_dim(r, 1, 5), k = random_dim(r, 1, 5), m = random_dim(r, 1, 5);
                 ParamSet p;
                 p.add("a", random_array(r, {n, k}));
                 p.add("b", random_array(r, {k, m}));
                 p.add("c", random_array(r, {m}));
                 return p;
             },
             [](Tape& t, const BoundParams& p, auto& r) {
                 return scalar_head(t, add_row_bias(t, matmul(t, p[0], p[1]), p[2]), r);
             }},
            {"prepend_select",
             [](std::mt19937_64& r) {
                 const std::size_t n = random_dim(r, 1, 6), k = random_dim(r, 1, 4);
                 ParamSet p;
                 p.add("col", random_array(r, {n}));
                 p.add("rest", random_array(r, {n, k}));
                 return p;
             },
             [](Tape& t, const BoundParams& p, auto& r) {
                 const Var m = prepend_column(t, p[0], p[1]);
                 const std::size_t n = t.value(m).dim(0);
                 std::vector<std::size_t> rows;
                 for (std::size_t i = 0; i < n + 2; ++i) rows.push_back(r() % n);
                 return scalar_head(t, select_rows(t, m, rows), r);
             }},
            {"conv2d_channels",
             [](std::mt19937_64& r) {
                 const std::size_t rows = random_dim(r, 1, 4), cols = random_dim(r, 1, 4);
                 const std::size_t ci = random_dim(r, 1, 3), co = random_dim(r, 1, 3);
                 const std::size_t kh = random_dim(r, 1, 3), kw = random_dim(r, 1, 3);
                 ParamSet p;
                 p.add("x", random_array(r, {rows, cols, ci}));
                 p.add("k", random_array(r, {kh, kw, ci, co}));
                 p.add("b", random_array(r, {co}));
                 return p;
             },
             [](Tape& t, const BoundParams& p, auto& r) {
                 const Var y = conv2d(t, p[0], p[1], p[2]);
                 const Var m = (r() % 2) ? channel_mean(t, y) : channel_sum(t, y);
                 const std::size_t total = t.value(m).size();
                 return scalar_head(t, reshape(t, m, {total}), r);
             }},
            {"gru_cell",
             [](std::mt19937_64& r) {
                 const std::size_t h = random_dim(r, 1, 4), d = random_dim(r, 1, 4);
                 ParamSet p;
                 for (const char* n : {"w_z", "w_r", "w_h"}) p.add(n, random_array(r, {h, d}));
                 for (const char* n : {"u_z", "u_r", "u_h"}) p.add(n, random_array(r, {h, h}));
                 for (const char* n : {"b_z", "b_r", "b_h"}) p.add(n, random_array(r, {h}));
                 p.add("x", random_array(r, {d}));
                 p.add("h", random_array(r, {h}));
                 return p;
             },
             [](Tape& t, const BoundParams& p, auto& r) {
                 const GruWeights w{p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8]};
                 const GruActivation mode = (r() % 2) ? GruActivation::kStandard : GruActivation::kPaperLiteral;
                 return scalar_head(t, gru_cell(t, p[9], p[10], w, mode), r);
             }},
        };

        for (const Primitive& prim : primitives) {
            CAPTURE(prim.name);
            double worst = 0.0;
            for (int trial = 0; trial < 100; ++trial) {
                const ParamSet params = prim.make(rng);
                const std::uint64_t seed = rng();
                const GraphBuilder build = [&](Tape& t, const BoundParams& p) {
                    std::mt19937_64 local(seed);
                    return prim.apply(t, p, local);
                };
                worst = std::max(worst, grad_check(build, params).max_relative_error);
            }
            CHECK(worst < 1e-4);
        }
    }
}

TEST_CASE("backward visits each node once and rejects non-scalar roots") {
    Tape t;
    const Var x = t.leaf(Array::vector({1.0, 2.0}));
    const Var y = mul(t, x, x);
    CHECK_THROWS_AS(t.backward(y), etpp::Error);
    const Var s = masked_sse(t, y, Array({2}), Array({2}, 1.0));
    t.backward(s);
    // d/dx sum(x^4) = 4 x^3.
    CHECK(t.grad(x).values() == std::vector<double>{4.0, 32.0});
    // A second backward from the same root gives the same result, not double.
    t.backward(s);
    CHECK(t.grad(x).values() == std::vector<double>{4.0, 32.0});
}
