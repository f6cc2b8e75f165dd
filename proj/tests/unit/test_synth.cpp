// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "etpp/error.hpp"
#include "etpp/io.hpp"
#include "etpp/synth.hpp"
#include "test_support.hpp"

using namespace etpp;
using namespace etpp::synth;

TEST_SUITE("generate") {
    TEST_CASE("same seed gives byte-identical files") {
        SynthConfig c;
        c.events = 8;
        testing::TempDir a("synth_a"), b("synth_b");
        write(generate(c), c, a.path());
        write(generate(c), c, b.path());
        for (const char* f : {"transactions.csv", "events.csv", "seatmap.csv", "synth_config.json"}) {
            CHECK(io::read_text_file(a / f) == io::read_text_file(b / f));
        }
        SynthConfig other = c;
        other.seed = 8;
        CHECK(domain::to_csv(generate(other).transactions) != domain::to_csv(generate(c).transactions));
    }

    TEST_CASE("written files load back as the same dataset") {
        SynthConfig c;
        c.events = 5;
        const domain::Dataset ds = generate(c);
        testing::TempDir dir("synth_rt");
        write(ds, c, dir.path());
        const domain::Dataset back = domain::load_dataset(dir.path());
        CHECK(back.transactions == ds.transactions);
        CHECK(back.events == ds.events);
        CHECK(back.seat_map == ds.seat_map);
        CHECK(config_from_json(nlohmann::json::parse(io::read_text_file(dir / "synth_config.json"))) == c);
    }

    TEST_CASE("sell-through 1 and noise 0 give every seat at the exact formula") {
        SynthConfig c;
        c.events = 6;
        c.rows = 5;
        c.cols = 7;
        c.sell_through = 1.0;
        c.noise_stdev = 0.0;
        c.shock_stdev = 0.0;
        const domain::Dataset ds = generate(c);
        REQUIRE(ds.transactions.size() == 6u * 35u);
        for (const domain::Transaction& t : ds.transactions) {
            const domain::EventRecord& e = *ds.events.find(t.event_id);
            const double strength = std::stod(e.attributes[0]);
            const double rank = std::stod(e.attributes[1]);
            const double weekend = std::stod(e.attributes[2]);
            const double days = std::stod(e.attributes[3]);
            const double dr = t.row - 1.0, dc = t.col - 4.0;
            const double spatial = 1.0 / (1.0 + c.spatial_decay * std::sqrt(dr * dr + dc * dc));
            const double temporal = 1.0 + c.temporal_gain * std::exp(-t.dte / c.temporal_scale);
            const double event = std::exp(c.strength_effect * strength + c.rank_effect * (15.5 - rank) / 14.5 +
                                          c.weekend_effect * weekend + c.season_effect * days / 100.0);
            CHECK(t.price == doctest::Approx(c.base_price * spatial * temporal * event).epsilon(1e-12));
        }
    }

    TEST_CASE("at most one sale per seat, prices positive, attributes in range") {
        const domain::Dataset ds = generate(SynthConfig{});
        std::set<std::tuple<std::string, int, int>> seen;
        for (const domain::Transaction& t : ds.transactions) {
            CHECK(seen.insert({t.event_id, t.row, t.col}).second);
            CHECK(t.price > 0.0);
            CHECK(t.dte >= 0.0);
            CHECK(ds.seat_map.find(t.row, t.col).has_value());
        }
        CHECK_NOTHROW(domain::validate(ds));
        for (const domain::EventRecord& e : ds.events.events) {
            const int rank = std::stoi(e.attributes[1]);
            CHECK(rank >= 1);
            CHECK(rank <= 30);
            CHECK((e.attributes[2] == "0" || e.attributes[2] == "1"));
            CHECK(std::stod(e.attributes[3]) >= 0.0);
        }
    }

    TEST_CASE("seasons restart the days-into-season clock") {
        SynthConfig c;
        c.events = 45;
        c.season_events = 20;
        const domain::Dataset ds = generate(c);
        CHECK(ds.events.events[0].attributes[3] == "0");
        CHECK(ds.events.events[20].attributes[3] == "0");
        CHECK(ds.events.events[40].attributes[3] == "0");
        for (std::size_t k = 1; k < ds.events.events.size(); ++k)
            CHECK(ds.events.events[k].event_date > ds.events.events[k - 1].event_date);
    }

    TEST_CASE("near-event sales outnumber a month out") {
        const domain::Dataset ds = generate(SynthConfig{});
        std::size_t near = 0, far = 0;
        for (const domain::Transaction& t : ds.transactions) {
            if (t.dte < 7.0) ++near;
            if (t.dte >= 30.0 && t.dte < 37.0) ++far;
        }
        CHECK(near > far);
    }

    TEST_CASE("invalid configs rejected") {
        const auto bad = [](auto mutate) {
            SynthConfig c;
            mutate(c);
            CHECK_THROWS_AS(validate(c), Error);
            CHECK_THROWS_AS(generate(c), Error);
        };
        bad([](SynthConfig& c) { c.events = 0; });
        bad([](SynthConfig& c) { c.rows = 0; });
        bad([](SynthConfig& c) { c.sell_through = 0.0; });
        bad([](SynthConfig& c) { c.sell_through = 1.5; });
        bad([](SynthConfig& c) { c.dte_decay = 0.0; });
        bad([](SynthConfig& c) { c.noise_stdev = -0.1; });
        bad([](SynthConfig& c) { c.base_price = 0.0; });
        bad([](SynthConfig& c) { c.season_events = 0; });
        CHECK_THROWS_AS(config_from_json(nlohmann::json{{"sell_thru", 0.5}}), Error);
    }
}

TEST_SUITE("describe") {
    TEST_CASE("histogram reports empty days as zero") {
        domain::Dataset ds;
        ds.seat_map = domain::SeatMap({{1, 1, "a"}, {1, 2, "a"}});
        ds.events.events = {{"e", 0, {}}};
        ds.transactions = {{"e", 1, 1, 0.5, 10.0}, {"e", 1, 2, 3.2, 20.0}};
        const Summary s = describe(ds);
        CHECK(s.dte_histogram == std::vector<std::size_t>{1, 0, 0, 1});
        CHECK(s.dte_octaves == std::vector<std::size_t>{1, 0, 1});
        CHECK(s.sale_rate == 1.0);
        CHECK(s.price_quantiles.back() == 20.0);
    }

    TEST_CASE("sale rate matches sell-through within three standard errors") {
        for (const double p : {0.3, 0.6, 0.9}) {
            SynthConfig c;
            c.sell_through = p;
            const Summary s = describe(generate(c));
            const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(s.events * s.seats));
            CHECK(std::abs(s.sale_rate - p) <= 3.0 * se);
        }
    }

    TEST_CASE("per-day sale density decreases across octave bands") {
        SynthConfig c;
        c.events = 60;
        const Summary s = describe(generate(c));
        // Band 0 is [0,1), band k >= 1 is [2^(k-1), 2^k).
        std::vector<double> density, variance;
        for (std::size_t k = 0; k < s.dte_octaves.size(); ++k) {
            const double width = k == 0 ? 1.0 : std::ldexp(1.0, static_cast<int>(k) - 1);
            const auto count = static_cast<double>(s.dte_octaves[k]);
            density.push_back(count / width);
            variance.push_back(std::max(count, 1.0) / (width * width));
        }
        REQUIRE(density.size() >= 6);
        for (std::size_t k = 1; k < density.size(); ++k) {
            // Three Poisson standard errors on the difference.
            CHECK(density[k] <= density[k - 1] + 3.0 * std::sqrt(variance[k] + variance[k - 1]));
        }
    }

    TEST_CASE("quantiles are monotone") {
        const Summary s = describe(generate(SynthConfig{}));
        REQUIRE(s.price_quantiles.size() == s.quantile_levels.size());
        for (std::size_t i = 1; i < s.price_quantiles.size(); ++i)
            CHECK(s.price_quantiles[i] >= s.price_quantiles[i - 1]);
    }

    TEST_CASE("empty dataset rejected") {
        CHECK_THROWS_AS(describe(domain::Dataset{}), Error);
    }
}
