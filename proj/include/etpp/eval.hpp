// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "etpp/domain.hpp"
#include "etpp/model/config.hpp"
#include "json.hpp"

namespace etpp::eval {

/// Mean squared error; rejects empty or unequal inputs.
double mse(std::span<const double> actual, std::span<const double> predicted);
/// Mean absolute percentage error as a fraction; rejects any actual <= 0.
double mape(std::span<const double> actual, std::span<const double> predicted);

struct BacktestSplit {
    domain::Date split_date = 0;
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
};

/// Test = the first `test_count` events dated strictly after the split date,
/// validation = the `val_count` events before them, train = everything
/// earlier. Throws naming the date if any set would be short or train empty.
BacktestSplit make_backtest_split(const domain::EventTable& events, domain::Date split_date,
                                  std::size_t test_count = 14, std::size_t val_count = 10);
std::vector<BacktestSplit> make_backtest_splits(const domain::EventTable& events,
                                                std::span<const domain::Date> split_dates,
                                                std::size_t test_count = 14, std::size_t val_count = 10);

/// `count` split dates evenly spaced over the feasible range: each leaves at
/// least `min_train` training events and a full test window. A split date is
/// the date of its last validation event.
std::vector<domain::Date> even_split_dates(const domain::EventTable& events, std::size_t count,
                                           std::size_t test_count = 14, std::size_t val_count = 10,
                                           std::size_t min_train = 16);

enum class Method { kEtpp, kEtpp1, kEtpp2, kEtpp3, kGameMedian, kSectionMedian, kLinear };

std::string_view to_string(Method m);
/// "etpp", "etpp1", "etpp2", "etpp3", "game_median", "section_median", "linear".
Method parse_method(std::string_view text);
std::vector<Method> parse_methods(std::string_view comma_list);
std::vector<Method> all_methods();

struct BacktestOptions {
    std::vector<Method> methods;
    std::vector<BacktestSplit> splits;
    /// One repetition per seed.
    std::vector<std::uint64_t> seeds;
    model::ModelConfig model;
    /// Worker threads over the (split, method, repetition) grid.
    std::size_t workers = 1;
};

/// Test-event transactions split at the split date: `observed` were sold
/// before it and are available to every method, `evaluated` were sold on or
/// after it and are the ground truth.
struct TestEventData {
    std::string event_id;
    std::vector<domain::Transaction> observed;
    std::vector<domain::Transaction> evaluated;
};

std::vector<TestEventData> split_test_events(const domain::Dataset& dataset, const BacktestSplit& split);

struct RunResult {
    std::size_t split = 0;
    Method method = Method::kEtpp;
    std::size_t repetition = 0;
    std::uint64_t seed = 0;
    double mse = 0.0;
    double mape = 0.0;
    std::size_t evaluated = 0;
    bool failed = false;
    std::string error;
    /// Fingerprint of the events every fitted statistic was computed on.
    std::uint64_t fitted_on = 0;
    /// True when fitted_on matches the method's fitting events and no test
    /// event was among them.
    bool isolation_ok = false;
};

struct MethodSummary {
    Method method = Method::kEtpp;
    std::vector<double> split_mse;   ///< mean over repetitions, per split
    std::vector<double> split_mape;
    double mean_mse = 0.0;
    double se_mse = 0.0;
    double mean_mape = 0.0;
    double se_mape = 0.0;
    std::size_t failures = 0;
};

struct BacktestReport {
    std::vector<RunResult> runs;  ///< ordered by (split, method, repetition)
    std::vector<MethodSummary> methods;
    std::size_t repetitions = 0;
    bool reduced = false;  ///< fewer than 10 repetitions
    nlohmann::json metadata;

    [[nodiscard]] const MethodSummary& summary(Method m) const;
};

/// Trains and evaluates every (split, method, repetition). Failures are
/// recorded per run and excluded from aggregates.
BacktestReport run_backtest(const domain::Dataset& dataset, const BacktestOptions& options);

/// Recomputes the per-method aggregates from the stored runs.
std::vector<MethodSummary> aggregate(const std::vector<RunResult>& runs, std::span<const Method> methods,
                                     std::size_t split_count);

struct SweepRow {
    std::size_t bins = 0;
    double mean_mape = 0.0;
    double se_mape = 0.0;
    double mean_mse = 0.0;
    double se_mse = 0.0;
};

/// Full ETPP backtest per bin count.
std::vector<SweepRow> bin_sweep(const domain::Dataset& dataset, std::span<const std::size_t> bins,
                                BacktestOptions options);

/// Every method on shared splits and seeds.
BacktestReport ablation_suite(const domain::Dataset& dataset, BacktestOptions options);

nlohmann::json to_json(const BacktestReport& report);
/// One row per run: split,method,repetition,seed,mse,mape,evaluated,failed,error
std::string runs_csv(const BacktestReport& report);
/// method,mean_mse,se_mse,mean_mape,se_mape,failures
std::string summary_csv(const BacktestReport& report);
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace etpp::eval
