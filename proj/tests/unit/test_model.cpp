// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include <cmath>
#include <random>

#include "doctest.h"
#include "etpp/error.hpp"
#include "etpp/model/checkpoint.hpp"
#include "etpp/numerics/ops.hpp"
#include "etpp/synth.hpp"
#include "test_support.hpp"
#include "toy_model.hpp"

using namespace etpp;
using namespace etpp::model;
using numerics::Array;
using numerics::GruActivation;

namespace {

ParamSet zeros_like(const ParamSet& p) {
    ParamSet z;
    for (std::size_t i = 0; i < p.size(); ++i) z.add(p.name(i), Array(p.at(i).shape()));
    return z;
}

Array eval_var(Tape& t, Var v) { return t.value(v); }

// Small dataset shared by the training, prediction and checkpoint cases.
struct TinyData {
    domain::Dataset ds;
    std::vector<std::string> train, val;
    ModelConfig config;
};

TinyData tiny_data() {
    synth::SynthConfig sc;
    sc.events = 14;
    sc.rows = 2;
    sc.cols = 4;
    sc.sell_through = 0.9;
    TinyData d{synth::generate(sc), {}, {}, {}};
    for (const auto* e : d.ds.events_by_date()) (d.train.size() < 10 ? d.train : d.val).push_back(e->event_id);
    d.config.bins = 3;
    d.config.grid_rows = 2;
    d.config.grid_cols = 2;
    d.config.hidden = 5;
    d.config.refine_width = 4;
    d.config.epochs = 60;
    d.config.patience = 0;
    d.config.seed = 3;
    return d;
}

}  // namespace

TEST_SUITE("spatial_forward") {
    TEST_CASE("all-zero parameters give D = 0") {
        std::mt19937_64 rng(1);
        const testing::ToyInstance toy = testing::make_toy(rng, GruActivation::kStandard);
        const ParamSet zero = zeros_like(toy.params);
        Tape t;
        const NetVars v = bind_network(t, zero);
        Array map({toy.config.grid_rows, toy.config.grid_cols}, 1.7);
        const Var d = spatial_forward(t, toy.network(), v, t.constant(map));
        CHECK(eval_var(t, d) == Array({toy.prep.dims().m()}));
    }

    TEST_CASE("output length is m for every grid shape") {
        for (std::size_t gr = 1; gr <= 4; ++gr)
            for (std::size_t gc = 1; gc <= 5; ++gc) {
                ModelConfig cfg;
                cfg.grid_rows = gr;
                cfg.grid_cols = gc;
                const Network net{cfg, {gr, gc, 2}};
                const ParamSet params = init_params(cfg, net.dims, 9);
                Tape t;
                const NetVars v = bind_network(t, params);
                const Var d = spatial_forward(t, net, v, t.constant(Array({gr, gc}, 0.5)));
                CHECK(t.value(d).shape() == numerics::Shape{gr * gc});
            }
    }

    TEST_CASE("1x1 grid traced by hand through all three layers") {
        ModelConfig cfg;
        cfg.grid_rows = cfg.grid_cols = 1;
        cfg.hidden = 2;
        const Network net{cfg, {1, 1, 0}};
        ParamSet p = init_params(cfg, net.dims, 5);
        // Only the tap at the pad-before offset touches a 1x1 map; every other
        // tap keeps its random value and must not matter.
        Array& k1 = p.get("conv1.kernel");  // [1,3,1,3]
        const double c1[3] = {1.0, -1.0, 0.5};
        for (std::size_t o = 0; o < 3; ++o) k1[(0 * 3 + 1) * 3 + o] = c1[o];
        p.get("conv1.bias") = Array::vector({0, 0, 0.25});
        Array& k2 = p.get("conv2.kernel");  // [2,1,3,3]
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t o = 0; o < 3; ++o) k2[((1 * 1 + 0) * 3 + i) * 3 + o] = i == o ? 1.0 : 0.0;
        p.get("conv2.bias") = Array::vector({0, 0, 0});
        Array& k3 = p.get("conv3.kernel");  // [2,3,3,3]
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t o = 0; o < 3; ++o) k3[((1 * 3 + 1) * 3 + i) * 3 + o] = 1.0;
        p.get("conv3.bias") = Array::vector({0, -4, 0.75});
        p.get("W_D") = Array::matrix(1, 1, {2});
        p.get("b_D") = Array::vector({-1});
        // h1 = relu([2,-2,1.25]) = [2,0,1.25]; h2 = h1; h3 = relu(3.25 + [0,-4,.75]) = [3.25,0,4]
        // D = relu(2 * mean(h3) - 1) = 2 * 7.25 / 3 - 1
        Tape t;
        const NetVars v = bind_network(t, p);
        const Var d = spatial_forward(t, net, v, t.constant(Array::matrix(1, 1, {2})));
        CHECK(t.value(d)[0] == doctest::Approx(2.0 * 7.25 / 3.0 - 1.0).epsilon(1e-14));
    }
}

TEST_SUITE("temporal_step") {
    TEST_CASE("zero weights: h = h_prev / 2 and G_hat = b_G") {
        ModelConfig cfg;
        cfg.hidden = 3;
        const Network net{cfg, {1, 2, 1}};
        ParamSet p = zeros_like(init_params(cfg, net.dims, 1));
        p.get("b_G") = Array::vector({0.25, -4});
        Tape t;
        const NetVars v = bind_network(t, p);
        const TemporalOut out = temporal_step(t, net, v, t.constant(Array::vector({1, 2})),
                                              t.constant(Array::vector({3})), t.constant(Array::vector({2, -4, 1})));
        CHECK(t.value(out.hidden) == Array::vector({1, -2, 0.5}));
        CHECK(t.value(out.g_hat) == Array::vector({0.25, -4}));

        Tape t0;
        const NetVars v0 = bind_network(t0, p);
        const TemporalOut zero = temporal_step(t0, net, v0, t0.constant(Array::vector({1, 2})),
                                               t0.constant(Array::vector({3})), t0.constant(Array({3})));
        CHECK(t0.value(zero.g_hat) == Array::vector({0.25, -4}));
    }

    TEST_CASE("wrong feature width rejected") {
        ModelConfig cfg;
        cfg.hidden = 2;
        const Network net{cfg, {1, 1, 2}};
        const ParamSet p = init_params(cfg, net.dims, 1);
        Tape t;
        const NetVars v = bind_network(t, p);
        CHECK_THROWS_AS(temporal_step(t, net, v, t.constant(Array::vector({1})), t.constant(Array::vector({1, 2, 3})),
                                      t.constant(Array({2}))),
                        Error);
    }
}

TEST_SUITE("refine_forward") {
    TEST_CASE("zero refine weights broadcast the outer bias") {
        ModelConfig cfg;
        const Network net{cfg, {1, 2, 0}};
        ParamSet p = init_params(cfg, net.dims, 1);
        for (const char* name : {"W_P1", "b_P1", "W_P2"}) p.get(name).fill(0.0);
        p.get("b_P2") = Array::vector({3.5});
        Tape t;
        const NetVars v = bind_network(t, p);
        const Var out = refine_forward(t, v, t.constant(Array::vector({1, 2})), {0, 1, 1, 0, 1},
                                       Array({5, 3}, 0.3));
        CHECK(t.value(out) == Array({5, 1}, 3.5));
    }

    TEST_CASE("two grids traced by hand") {
        ModelConfig cfg;
        cfg.refine_width = 2;
        const Network net{cfg, {1, 2, 0}};
        ParamSet p = init_params(cfg, net.dims, 1);
        p.get("W_P1") = Array::matrix(4, 2, {1, -1, 0, 2, 1, 0, 0, 0});
        p.get("b_P1") = Array::vector({0, 0.5});
        p.get("W_P2") = Array::matrix(2, 1, {2, 5});
        p.get("b_P2") = Array::vector({0.1});
        Tape t;
        const NetVars v = bind_network(t, p);
        const Var out = refine_forward(t, v, t.constant(Array::vector({1, 3})), {0, 1},
                                       Array::matrix(2, 3, {0, 0, 0, 1, -1, 0}));
        // rows [1,0,0,0] and [3,1,-1,0] -> inner [1,0] and [2,0] -> [2.1, 4.1]
        CHECK(t.value(out)[0] == doctest::Approx(2.1).epsilon(1e-15));
        CHECK(t.value(out)[1] == doctest::Approx(4.1).epsilon(1e-15));
    }
}

TEST_SUITE("forward_event") {
    TEST_CASE("L = 1 is the composition of the three blocks") {
        std::mt19937_64 rng(11);
        testing::ToyInstance toy = testing::make_toy(rng, GruActivation::kStandard);
        toy.config.bins = 1;
        toy.prep.binning.bins = 1;
        toy.input = Array({toy.prep.dims().m(), 1}, 0.4);
        const Network net = toy.network();
        const std::size_t n = toy.prep.seat_map.size();
        std::vector<std::size_t> grids(toy.prep.layout.seat_to_grid);
        const Array rows = toy.prep.seat_static(1);

        Tape a;
        const NetVars va = bind_network(a, toy.params);
        const std::vector<RefineRequest> req = {{grids, rows}};
        const ForwardResult f = forward_event(a, net, va, toy.input, toy.example.features, req);

        Tape b;
        const NetVars vb = bind_network(b, toy.params);
        const Var d = spatial_forward(b, net, vb, b.constant(Array({net.dims.grid_rows, net.dims.grid_cols}, 0.4)));
        const TemporalOut step = temporal_step(b, net, vb, d, b.constant(toy.example.features),
                                               b.constant(Array({toy.config.hidden})));
        const Var p = refine_forward(b, vb, step.g_hat, grids, rows);
        CHECK(a.value(f.g_hat[0]) == b.value(step.g_hat));
        CHECK(a.value(f.p_hat[0]) == b.value(p));
        CHECK(a.value(f.p_hat[0]).size() == n);
    }

    TEST_CASE("outputs finite and independent of other events on the tape") {
        std::mt19937_64 rng(12);
        for (int trial = 0; trial < 20; ++trial) {
            const testing::ToyInstance a = testing::make_toy(rng, GruActivation::kPaperLiteral);
            const Network net = a.network();
            Tape solo;
            const ForwardResult fa = forward_event(solo, net, bind_network(solo, a.params), a.input, a.example.features, {});
            Tape shared;
            const NetVars v = bind_network(shared, a.params);
            Array other = a.input;
            for (double& x : other.data()) x = -3.0 * x + 1.0;
            forward_event(shared, net, v, other, a.example.features, {});
            const ForwardResult fb = forward_event(shared, net, v, a.input, a.example.features, {});
            for (std::size_t j = 0; j < a.config.bins; ++j) {
                CHECK(solo.value(fa.g_hat[j]).all_finite());
                CHECK(solo.value(fa.g_hat[j]) == shared.value(fb.g_hat[j]));
            }
        }
    }
}

TEST_SUITE("bilevel_loss") {
    TEST_CASE("grid SSE 2, seat SSE 4, weights 0.3/0.7") {
        Tape t;
        const Var g = t.leaf(Array::vector({0, 0}));
        const Var s = t.leaf(Array::vector({0}));
        const std::vector<MaskedTarget> grid = {{g, Array::vector({1, -1}), Array::vector({1, 1})}};
        const std::vector<MaskedTarget> seat = {{s, Array::vector({2}), Array::vector({1})}};
        const Var loss = bilevel_loss(t, grid, seat, 0.3, 0.7);
        CHECK(t.value(loss)[0] == 0.3 * 2.0 + 0.7 * 4.0);
        CHECK(t.value(loss)[0] == doctest::Approx(3.4).epsilon(1e-15));
    }

    TEST_CASE("all masks zero: loss 0, every gradient 0") {
        std::mt19937_64 rng(3);
        testing::ToyInstance toy = testing::make_toy(rng, GruActivation::kStandard);
        toy.example.target.coarse.mask.fill(0.0);
        toy.example.target.seats.mask.fill(0.0);
        Tape t;
        const numerics::BoundParams bound = numerics::bind(t, toy.params);
        const Var loss = testing::toy_loss(toy)(t, bound);
        CHECK(t.value(loss)[0] == 0.0);
        t.backward(loss);
        for (const Array& g : numerics::collect_grads(t, bound))
            for (const double x : g.data()) CHECK(x == 0.0);
    }

    TEST_CASE("negative weights rejected") {
        Tape t;
        CHECK_THROWS_AS(bilevel_loss(t, {}, {}, -0.1, 1.0), Error);
        CHECK_THROWS_AS(bilevel_loss(t, {}, {}, 1.0, -0.1), Error);
    }

    TEST_CASE("scaling alpha and beta by c scales loss and gradient by c") {
        std::mt19937_64 rng(4);
        testing::ToyInstance toy = testing::make_toy(rng, GruActivation::kStandard);
        const auto run = [&](double c, std::vector<Array>* grads) {
            testing::ToyInstance scaled = toy;
            scaled.config.alpha *= c;
            scaled.config.beta *= c;
            Tape t;
            const numerics::BoundParams bound = numerics::bind(t, scaled.params);
            const Var loss = testing::toy_loss(scaled)(t, bound);
            t.backward(loss);
            *grads = numerics::collect_grads(t, bound);
            return t.value(loss)[0];
        };
        std::vector<Array> g1, g4;
        const double l1 = run(1.0, &g1);
        const double l4 = run(4.0, &g4);
        CHECK(l1 >= 0.0);
        CHECK(l4 == doctest::Approx(4.0 * l1).epsilon(1e-12));
        for (std::size_t i = 0; i < g1.size(); ++i)
            for (std::size_t k = 0; k < g1[i].size(); ++k)
                CHECK(g4[i][k] == doctest::Approx(4.0 * g1[i][k]).epsilon(1e-10));
    }

    TEST_CASE("targets at masked positions never matter, bit for bit") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            const testing::ToyInstance toy = testing::make_toy(rng, GruActivation::kStandard);
            testing::ToyInstance noisy = toy;
            for (std::size_t i = 0; i < noisy.example.target.seats.mask.size(); ++i)
                if (noisy.example.target.seats.mask[i] == 0.0) noisy.example.target.seats.values[i] = 1e6 + i;
            for (std::size_t i = 0; i < noisy.example.target.coarse.mask.size(); ++i)
                if (noisy.example.target.coarse.mask[i] == 0.0) noisy.example.target.coarse.values[i] = NAN;
            const auto run = [](const testing::ToyInstance& x, std::vector<Array>* grads) {
                Tape t;
                const numerics::BoundParams bound = numerics::bind(t, x.params);
                const Var loss = testing::toy_loss(x)(t, bound);
                t.backward(loss);
                *grads = numerics::collect_grads(t, bound);
                return t.value(loss)[0];
            };
            std::vector<Array> ga, gb;
            CHECK(run(toy, &ga) == run(noisy, &gb));
            CHECK(ga == gb);
        }
    }

    TEST_CASE("beta = 0 leaves refine parameters with exactly zero gradient") {
        std::mt19937_64 rng(6);
        testing::ToyInstance toy = testing::make_toy(rng, GruActivation::kStandard);
        toy.config.beta = 0.0;
        Tape t;
        const numerics::BoundParams bound = numerics::bind(t, toy.params);
        t.backward(testing::toy_loss(toy)(t, bound));
        const auto grads = numerics::collect_grads(t, bound);
        for (std::size_t i = 0; i < toy.params.size(); ++i) {
            const std::string& name = toy.params.name(i);
            if (name == "W_P1" || name == "b_P1" || name == "W_P2" || name == "b_P2") {
                for (const double x : grads[i].data()) CHECK(x == 0.0);
            }
        }
    }
}

TEST_SUITE("gradient check") {
    TEST_CASE("toy configs in both activation modes and all variants") {
        std::mt19937_64 rng(2026);
        for (const auto mode : {GruActivation::kStandard, GruActivation::kPaperLiteral}) {
            for (const auto variant : {Variant::kFull, Variant::kNoTemporal, Variant::kNoSpatial, Variant::kSeatLossOnly}) {
                for (int trial = 0; trial < 3; ++trial) {
                    const testing::ToyInstance toy = testing::make_toy(rng, mode, variant);
                    const numerics::GradCheckReport r = numerics::grad_check(testing::toy_loss(toy), toy.params);
                    INFO("mode " << numerics::to_string(mode) << " variant " << to_string(variant));
                    CHECK(r.max_relative_error < 1e-4);
                }
            }
        }
    }
}

TEST_SUITE("variants") {
    TEST_CASE("etpp3 loss equals the seat term alone") {
        std::mt19937_64 rng(7);
        const testing::ToyInstance full = testing::make_toy(rng, GruActivation::kStandard);
        testing::ToyInstance seat_only = full;
        seat_only.config = with_variant(full.config, Variant::kSeatLossOnly);
        testing::ToyInstance seat_term = full;
        seat_term.config.alpha = 0.0;
        seat_term.config.beta = 1.0;
        CHECK(numerics::evaluate(testing::toy_loss(seat_only), seat_only.params) ==
              numerics::evaluate(testing::toy_loss(seat_term), seat_term.params));
        CHECK(seat_only.config.alpha == 0.0);
        CHECK(seat_only.config.beta == 1.0);
    }

    TEST_CASE("etpp1 output at bin j ignores inputs at earlier bins") {
        std::mt19937_64 rng(8);
        testing::ToyInstance toy;
        do {
            toy = testing::make_toy(rng, GruActivation::kStandard, Variant::kNoTemporal);
        } while (toy.config.bins < 2);
        const Network net = toy.network();
        Tape a;
        const ForwardResult fa = forward_event(a, net, bind_network(a, toy.params), toy.input, toy.example.features, {});
        Array changed = toy.input;
        for (std::size_t g = 0; g < changed.dim(0); ++g) changed.at(g, 0) += 5.0;
        Tape b;
        const ForwardResult fb = forward_event(b, net, bind_network(b, toy.params), changed, toy.example.features, {});
        for (std::size_t j = 1; j < toy.config.bins; ++j) CHECK(a.value(fa.g_hat[j]) == b.value(fb.g_hat[j]));
    }

    TEST_CASE("etpp2 parameter count excludes conv and W_D") {
        ModelConfig cfg;
        const NetworkDims dims{4, 4, 4};
        const std::size_t m = 16, h = cfg.hidden, d = m + 4, g = cfg.refine_width;
        const std::size_t conv = (1 * 3 * 1 * 3 + 3) + (2 * 1 * 3 * 3 + 3) + (2 * 3 * 3 * 3 + 3);
        const std::size_t spatial = conv + m * m + m;
        const std::size_t recurrent = 3 * h * d + 3 * h * h + 3 * h;
        const std::size_t rest = m * h + m + 4 * g + g + g + 1;
        CHECK(init_params(cfg, dims, 1).scalar_count() == spatial + recurrent + rest);
        CHECK(init_params(with_variant(cfg, Variant::kNoSpatial), dims, 1).scalar_count() == recurrent + rest);
        CHECK(init_params(with_variant(cfg, Variant::kNoTemporal), dims, 1).scalar_count() ==
              spatial + h * d + h + rest);
    }
}

TEST_SUITE("training") {
    TEST_CASE("toy training lowers the loss and is deterministic") {
        const TinyData d = tiny_data();
        const Model a = fit_model(d.ds, d.train, d.val, d.config);
        REQUIRE(a.summary.history.size() == 60);
        CHECK(a.summary.history[50].train_loss < a.summary.history[0].train_loss);
        const Model b = fit_model(d.ds, d.train, d.val, d.config);
        CHECK(a.summary == b.summary);
        CHECK(a.params == b.params);
        CHECK(a.summary.best_val_loss == a.summary.history[a.summary.best_epoch].val_loss);
    }

    TEST_CASE("early stopping honours patience") {
        TinyData d = tiny_data();
        d.config.patience = 3;
        d.config.epochs = 400;
        const Model m = fit_model(d.ds, d.train, d.val, d.config);
        if (m.summary.stopped_early) {
            CHECK(m.summary.history.size() == m.summary.best_epoch + 4);
        }
    }

    TEST_CASE("empty splits rejected") {
        const TinyData d = tiny_data();
        CHECK_THROWS_AS(fit_model(d.ds, d.train, {}, d.config), Error);
        CHECK_THROWS_AS(fit_model(d.ds, {}, d.val, d.config), Error);
    }

    TEST_CASE("invalid configs rejected") {
        ModelConfig c;
        c.alpha = -1;
        CHECK_THROWS_AS(validate(c), Error);
        c = {};
        c.alpha = c.beta = 0;
        CHECK_THROWS_AS(validate(c), Error);
        c = {};
        c.hidden = 0;
        CHECK_THROWS_AS(validate(c), Error);
    }
}

TEST_SUITE("predict and checkpoint") {
    TEST_CASE("prediction semantics") {
        TinyData d = tiny_data();
        d.config.epochs = 5;
        const Model m = fit_model(d.ds, d.train, d.val, d.config);
        const domain::EventRecord& ev = *d.ds.events.find(d.val.back());
        const std::vector<SeatQuery> q = {{1, 1, 0.0}, {2, 3, 40.0}, {1, 4, 2.0}};
        const std::vector<double> p = predict(m, ev, {}, q);
        REQUIRE(p.size() == 3);
        for (const double x : p) CHECK(std::isfinite(x));

        // Same bin, same seat -> same price.
        const std::size_t j = coarsen::assign_bin(2.0, m.prep.binning);
        double other = 2.0;
        while (coarsen::assign_bin(other, m.prep.binning) == j && other > 0.0) other -= 0.25;
        other += 0.25;
        CHECK(predict(m, ev, {}, std::vector<SeatQuery>{{1, 4, other}})[0] == p[2]);

        // Order invariance.
        const std::vector<SeatQuery> rev = {q[2], q[1], q[0]};
        const std::vector<double> pr = predict(m, ev, {}, rev);
        CHECK(pr[0] == p[2]);
        CHECK(pr[2] == p[0]);

        CHECK_THROWS_WITH_AS(predict(m, ev, {}, std::vector<SeatQuery>{{9, 9, 1.0}}), doctest::Contains("(9,9)"), Error);
    }

    TEST_CASE("save, load, predict is bitwise identical") {
        TinyData d = tiny_data();
        d.config.epochs = 5;
        const Model m = fit_model(d.ds, d.train, d.val, d.config);
        testing::TempDir dir("ckpt");
        save_checkpoint(dir / "m.etpp", m);
        const Model back = load_checkpoint(dir / "m.etpp");
        CHECK(back.config == m.config);
        CHECK(back.params == m.params);
        CHECK(back.summary == m.summary);
        CHECK(back.prep.prior.values == m.prep.prior.values);
        CHECK(back.prep.price == m.prep.price);
        CHECK(back.prep.binning == m.prep.binning);
        CHECK(back.prep.encoder == m.prep.encoder);
        CHECK(back.prep.feature_scaler == m.prep.feature_scaler);
        CHECK(back.prep.seat_scaling == m.prep.seat_scaling);
        const domain::EventRecord& ev = *d.ds.events.find(d.val[0]);
        const auto partial = d.ds.transactions_of(d.val[0]);
        const std::vector<domain::Transaction> some(partial.begin(), partial.begin() + partial.size() / 2);
        std::vector<SeatQuery> q;
        for (const domain::Seat& s : m.prep.seat_map.seats()) q.push_back({s.row, s.col, 3.0});
        CHECK(predict(back, ev, some, q) == predict(m, ev, some, q));
        CHECK(encode_checkpoint(back) == encode_checkpoint(m));
    }

    TEST_CASE("truncated, corrupted and wrong-version files rejected") {
        TinyData d = tiny_data();
        d.config.epochs = 2;
        const std::string bytes = encode_checkpoint(fit_model(d.ds, d.train, d.val, d.config));
        for (const std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
            CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, cut)), Error);
        }
        std::string flipped = bytes;
        flipped[bytes.size() / 2] ^= 0x40;
        CHECK_THROWS_AS(decode_checkpoint(flipped), Error);
        std::string old = bytes;
        old[8] = 0;  // version field "0"
        CHECK_THROWS_WITH_AS(decode_checkpoint(old), doctest::Contains("version 0"), Error);
        CHECK_THROWS_WITH_AS(decode_checkpoint(old), doctest::Contains("version 1"), Error);
    }
}
