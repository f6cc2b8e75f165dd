// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "etpp/coarsen.hpp"
#include "etpp/error.hpp"
#include "etpp/io.hpp"

namespace etpp::synth {
namespace {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::string event_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "g%03zu", i + 1);
    return buf;
}

bool is_weekend(domain::Date d) {
    const auto dow = ((d % 7) + 7 + 4) % 7;  // 0 = Sunday; 1970-01-01 was a Thursday
    return dow == 0 || dow == 6;
}

}  // namespace

void validate(const SynthConfig& c) {
    const auto reject = [](const std::string& msg) { fail(ErrorKind::kInvalidArgument, "synth config: " + msg); };
    if (c.events == 0) reject("events must be >= 1");
    if (c.rows < 1 || c.cols < 1) reject("rows and cols must be >= 1");
    if (!(c.base_price > 0.0)) reject("base_price must be > 0");
    if (!(c.spatial_decay >= 0.0)) reject("spatial_decay must be >= 0");
    if (!(c.temporal_gain > -1.0)) reject("temporal_gain must be > -1");
    if (!(c.temporal_scale > 0.0)) reject("temporal_scale must be > 0");
    if (!(c.shock_stdev >= 0.0)) reject("shock_stdev must be >= 0");
    if (!(c.noise_stdev >= 0.0 && c.noise_stdev < 1.0 / 3.0)) reject("noise_stdev must lie in [0, 1/3)");
    if (!(c.sell_through > 0.0 && c.sell_through <= 1.0)) reject("sell_through must lie in (0, 1]");
    if (!(c.dte_decay > 0.0)) reject("dte_decay must be > 0");
    if (c.season_events == 0) reject("season_events must be >= 1");
    for (const double x : {c.strength_effect, c.rank_effect, c.weekend_effect, c.season_effect}) {
        if (!std::isfinite(x)) reject("event effects must be finite");
    }
    domain::parse_iso_date(c.season_start);
}

domain::Dataset generate(const SynthConfig& c) {
    validate(c);
    domain::Dataset ds;

    std::vector<domain::Seat> seats;
    for (int r = 1; r <= c.rows; ++r)
        for (int col = 1; col <= c.cols; ++col) seats.push_back({r, col, 2 * r <= c.rows ? "loge" : "balcony"});
    ds.seat_map = domain::SeatMap(seats);

    const double centre_col = (c.cols + 1) / 2.0;
    std::vector<double> spatial(seats.size());
    for (std::size_t s = 0; s < seats.size(); ++s) {
        const double dr = seats[s].row - 1.0;
        const double dc = seats[s].col - centre_col;
        spatial[s] = 1.0 / (1.0 + c.spatial_decay * std::sqrt(dr * dr + dc * dc));
    }

    // Season-level draws are sequential (team strength is a random walk);
    // per-event sales use seeds derived from (seed, event index).
    std::mt19937_64 season(splitmix64(c.seed));
    std::normal_distribution<double> normal(0.0, 1.0);
    ds.events.attribute_names = {"team_strength", "opponent_rank", "weekend", "days_into_season"};
    domain::Date date = domain::parse_iso_date(c.season_start);
    domain::Date start = date;
    double strength = 0.0;
    for (std::size_t k = 0; k < c.events; ++k) {
        if (k > 0) date += 1 + static_cast<domain::Date>(season() % 3);
        if (k > 0 && k % c.season_events == 0) start = date;
        strength = 0.8 * strength + 0.6 * normal(season);
        const int rank = 1 + static_cast<int>(season() % 30);
        const bool weekend = is_weekend(date);
        const double days = static_cast<double>(date - start);
        const double shock = c.shock_stdev * normal(season);
        const double strength_rounded = std::round(strength * 1000.0) / 1000.0;
        ds.events.events.push_back({event_name(k), date,
                                    {domain::format_double(strength_rounded), std::to_string(rank),
                                     weekend ? "1" : "0", domain::format_double(days)}});
        const double event_factor =
            std::exp(c.strength_effect * strength_rounded + c.rank_effect * (15.5 - rank) / 14.5 +
                     c.weekend_effect * (weekend ? 1.0 : 0.0) + c.season_effect * days / 100.0 + shock);

        std::mt19937_64 rng(splitmix64(c.seed ^ splitmix64(k + 1)));
        std::normal_distribution<double> eps_dist(0.0, 1.0);
        for (std::size_t s = 0; s < seats.size(); ++s) {
            if (uniform01(rng) >= c.sell_through) continue;
            const double dte = std::floor(24.0 * -std::log1p(-uniform01(rng)) / c.dte_decay) / 24.0;
            const double eps = std::clamp(eps_dist(rng), -3.0, 3.0);
            const double temporal = 1.0 + c.temporal_gain * std::exp(-dte / c.temporal_scale);
            const double price = c.base_price * spatial[s] * temporal * event_factor * (1.0 + c.noise_stdev * eps);
            ds.transactions.push_back({event_name(k), seats[s].row, seats[s].col, dte, price});
        }
    }
    return ds;
}

json to_json(const SynthConfig& c) {
    return {{"seed", c.seed},
            {"events", c.events},
            {"rows", c.rows},
            {"cols", c.cols},
            {"base_price", c.base_price},
            {"spatial_decay", c.spatial_decay},
            {"temporal_gain", c.temporal_gain},
            {"temporal_scale", c.temporal_scale},
            {"strength_effect", c.strength_effect},
            {"rank_effect", c.rank_effect},
            {"weekend_effect", c.weekend_effect},
            {"season_effect", c.season_effect},
            {"shock_stdev", c.shock_stdev},
            {"noise_stdev", c.noise_stdev},
            {"sell_through", c.sell_through},
            {"dte_decay", c.dte_decay},
            {"season_start", c.season_start},
            {"season_events", c.season_events}};
}

SynthConfig config_from_json(const json& j, SynthConfig c) {
    if (!j.is_object()) fail(ErrorKind::kParse, "synth config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "events") c.events = v.get<std::size_t>();
            else if (key == "rows") c.rows = v.get<int>();
            else if (key == "cols") c.cols = v.get<int>();
            else if (key == "base_price") c.base_price = v.get<double>();
            else if (key == "spatial_decay") c.spatial_decay = v.get<double>();
            else if (key == "temporal_gain") c.temporal_gain = v.get<double>();
            else if (key == "temporal_scale") c.temporal_scale = v.get<double>();
            else if (key == "strength_effect") c.strength_effect = v.get<double>();
            else if (key == "rank_effect") c.rank_effect = v.get<double>();
            else if (key == "weekend_effect") c.weekend_effect = v.get<double>();
            else if (key == "season_effect") c.season_effect = v.get<double>();
            else if (key == "shock_stdev") c.shock_stdev = v.get<double>();
            else if (key == "noise_stdev") c.noise_stdev = v.get<double>();
            else if (key == "sell_through") c.sell_through = v.get<double>();
            else if (key == "dte_decay") c.dte_decay = v.get<double>();
            else if (key == "season_start") c.season_start = v.get<std::string>();
            else if (key == "season_events") c.season_events = v.get<std::size_t>();
            else fail(ErrorKind::kParse, "unknown synth config key '" + key + "'");
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::kParse, std::string("synth config: ") + e.what());
    }
    return c;
}

void write(const domain::Dataset& dataset, const SynthConfig& config, const std::filesystem::path& dir) {
    domain::write_dataset(dataset, dir);
    io::write_text_file(dir / "synth_config.json", to_json(config).dump(2) + "\n");
}

Summary describe(const domain::Dataset& ds) {
    if (ds.events.events.empty() || ds.seat_map.size() == 0) {
        fail(ErrorKind::kInvalidArgument, "describe: dataset has no events or no seats");
    }
    Summary s;
    s.events = ds.events.events.size();
    s.seats = ds.seat_map.size();
    s.transactions = ds.transactions.size();
    s.sale_rate = static_cast<double>(s.transactions) / static_cast<double>(s.events * s.seats);
    std::vector<double> prices;
    for (const domain::Transaction& t : ds.transactions) {
        const auto day = static_cast<std::size_t>(t.dte);
        if (s.dte_histogram.size() <= day) s.dte_histogram.resize(day + 1, 0);
        ++s.dte_histogram[day];
        std::size_t band = 0;
        while (t.dte >= static_cast<double>(std::size_t{1} << band)) ++band;
        if (s.dte_octaves.size() <= band) s.dte_octaves.resize(band + 1, 0);
        ++s.dte_octaves[band];
        prices.push_back(t.price);
    }
    s.quantile_levels = {0.05, 0.25, 0.5, 0.75, 0.95, 1.0};
    if (!prices.empty()) {
        for (const double q : s.quantile_levels) s.price_quantiles.push_back(coarsen::nearest_rank_quantile(prices, q));
    }
    return s;
}

json to_json(const Summary& s) {
    return {{"events", s.events},
            {"seats", s.seats},
            {"transactions", s.transactions},
            {"sale_rate", s.sale_rate},
            {"dte_histogram", s.dte_histogram},
            {"dte_octaves", s.dte_octaves},
            {"quantile_levels", s.quantile_levels},
            {"price_quantiles", s.price_quantiles}};
}

}  // namespace etpp::synth
