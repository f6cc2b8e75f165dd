// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "etpp/domain.hpp"
#include "json.hpp"

namespace etpp::synth {

/// Synthetic ticket market. For event k and seat s:
///
///   price = base * spatial(s) * temporal(dte) * event(k) * (1 + noise * eps)
///   spatial(s)     = 1 / (1 + spatial_decay * |s - front centre|)
///   temporal(dte)  = 1 + temporal_gain * exp(-dte / temporal_scale)
///   event(k)       = exp(strength_effect * strength_k
///                        + rank_effect * (15.5 - opponent_rank_k) / 14.5
///                        + weekend_effect * weekend_k
///                        + season_effect * days_into_season_k / 100
///                        + shock_k),    shock_k ~ N(0, shock_stdev^2), unobserved
///
/// eps ~ N(0, 1) clipped to [-3, 3]. Each seat sells with probability
/// sell_through; dte ~ Exponential(dte_decay), floored to whole hours.
struct SynthConfig {
    std::uint64_t seed = 7;
    std::size_t events = 60;
    int rows = 16;
    int cols = 16;
    double base_price = 100.0;
    double spatial_decay = 0.15;
    double temporal_gain = 0.6;
    double temporal_scale = 7.0;
    double strength_effect = 0.15;
    double rank_effect = 0.15;
    double weekend_effect = 0.1;
    double season_effect = 0.05;
    double shock_stdev = 0.1;
    double noise_stdev = 0.05;
    double sell_through = 0.6;
    double dte_decay = 0.05;
    std::string season_start = "2024-10-22";
    /// Events per season; days_into_season restarts at 0 with each season.
    std::size_t season_events = 20;

    friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// Throws kInvalidArgument naming the first invalid field.
void validate(const SynthConfig& config);

domain::Dataset generate(const SynthConfig& config);

nlohmann::json to_json(const SynthConfig& config);
/// Fields present in `j` override `base`; unknown keys are rejected.
SynthConfig config_from_json(const nlohmann::json& j, SynthConfig base = {});

/// The three dataset CSVs plus synth_config.json.
void write(const domain::Dataset& dataset, const SynthConfig& config, const std::filesystem::path& dir);

struct Summary {
    std::size_t events = 0;
    std::size_t seats = 0;
    std::size_t transactions = 0;
    /// Transactions per whole-day dte, index = floor(dte), up to the maximum.
    std::vector<std::size_t> dte_histogram;
    /// Transactions per octave band [0,1), [1,2), [2,4), [4,8), ...
    std::vector<std::size_t> dte_octaves;
    /// transactions / (events * seats)
    double sale_rate = 0.0;
    /// Price quantiles at levels quantile_levels (nearest rank).
    std::vector<double> quantile_levels;
    std::vector<double> price_quantiles;
};

Summary describe(const domain::Dataset& dataset);
nlohmann::json to_json(const Summary& summary);

}  // namespace etpp::synth
