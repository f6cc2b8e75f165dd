// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <thread>

#include "etpp/baselines.hpp"
#include "etpp/error.hpp"
#include "etpp/log.hpp"
#include "etpp/model/checkpoint.hpp"
#include "etpp/model/train.hpp"

namespace etpp::eval {
namespace {

using nlohmann::json;

void check_pair(std::span<const double> a, std::span<const double> p, const char* what) {
    if (a.empty()) fail(ErrorKind::kInvalidArgument, std::string(what) + ": no observations");
    if (a.size() != p.size()) fail(ErrorKind::kShape, std::string(what) + ": actual and predicted lengths differ");
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Sample stdev of the values over sqrt(count); 0 for a single value.
double standard_error(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean_of(v);
    double ss = 0.0;
    for (const double x : v) ss += (x - mu) * (x - mu);
    return std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

bool disjoint(std::span<const std::string> a, std::span<const std::string> b) {
    const std::set<std::string> sa(a.begin(), a.end());
    return std::none_of(b.begin(), b.end(), [&](const std::string& x) { return sa.count(x) > 0; });
}

bool is_etpp(Method m) {
    return m == Method::kEtpp || m == Method::kEtpp1 || m == Method::kEtpp2 || m == Method::kEtpp3;
}

model::Variant variant_of(Method m) {
    switch (m) {
        case Method::kEtpp1:
            return model::Variant::kNoTemporal;
        case Method::kEtpp2:
            return model::Variant::kNoSpatial;
        case Method::kEtpp3:
            return model::Variant::kSeatLossOnly;
        default:
            return model::Variant::kFull;
    }
}

RunResult run_one(const domain::Dataset& dataset, const BacktestSplit& split, const std::vector<TestEventData>& tests,
                  Method method, std::uint64_t seed, const model::ModelConfig& base) {
    RunResult r;
    r.method = method;
    r.seed = seed;
    std::vector<double> actual, predicted;
    for (const TestEventData& t : tests)
        for (const domain::Transaction& tx : t.evaluated) actual.push_back(tx.price);
    if (actual.empty()) fail(ErrorKind::kData, "split has no evaluated test transactions");

    if (is_etpp(method)) {
        model::ModelConfig cfg = model::with_variant(base, variant_of(method));
        cfg.seed = seed;
        const model::Model m = model::fit_model(dataset, split.train, split.validation, cfg);
        const std::uint64_t fp = domain::fingerprint_events(split.train);
        const model::Preprocessing& p = m.prep;
        r.fitted_on = p.fitted_on;
        const bool stamped = p.fitted_on == fp && p.binning.fitted_on == fp && p.price.fitted_on == fp &&
                             p.prior.fitted_on == fp && p.seat_scaling.dte.fitted_on == fp &&
                             std::all_of(p.feature_scaler.columns.begin(), p.feature_scaler.columns.end(),
                                         [&](const domain::Standardizer& s) { return s.fitted_on == fp; });
        r.isolation_ok = stamped && disjoint(split.train, split.test) && disjoint(split.validation, split.test);
        for (const TestEventData& t : tests) {
            std::vector<model::SeatQuery> queries;
            for (const domain::Transaction& tx : t.evaluated) queries.push_back({tx.row, tx.col, tx.dte});
            const std::vector<double> out = model::predict(m, *dataset.events.find(t.event_id), t.observed, queries);
            predicted.insert(predicted.end(), out.begin(), out.end());
        }
    } else {
        std::vector<std::string> fit_ids = split.train;
        fit_ids.insert(fit_ids.end(), split.validation.begin(), split.validation.end());
        r.fitted_on = domain::fingerprint_events(fit_ids);
        r.isolation_ok = disjoint(fit_ids, split.test);
        std::vector<domain::Transaction> fit_tx;
        for (auto& g : model::transactions_by_event(dataset, fit_ids)) fit_tx.insert(fit_tx.end(), g.begin(), g.end());

        if (method == Method::kGameMedian) {
            const baselines::GameMedian gm(fit_tx);
            for (const TestEventData& t : tests) predicted.insert(predicted.end(), t.evaluated.size(), gm.predict(t.observed));
        } else if (method == Method::kSectionMedian) {
            const baselines::SectionMedian sm(fit_tx, dataset.seat_map);
            for (const TestEventData& t : tests) {
                const auto by_section = sm.predict(t.observed);
                for (const domain::Transaction& tx : t.evaluated) predicted.push_back(sm.predict_seat(by_section, tx.row, tx.col));
            }
        } else {
            const baselines::LinearModel lm(dataset, fit_ids);
            for (const TestEventData& t : tests) {
                const domain::EventRecord& rec = *dataset.events.find(t.event_id);
                for (const domain::Transaction& tx : t.evaluated) predicted.push_back(lm.predict(rec, tx.row, tx.col, tx.dte));
            }
        }
    }
    r.mse = mse(actual, predicted);
    r.mape = mape(actual, predicted);
    r.evaluated = actual.size();
    if (!std::isfinite(r.mse) || !std::isfinite(r.mape)) fail(ErrorKind::kNumeric, "non-finite metric");
    return r;
}

}  // namespace

double mse(std::span<const double> actual, std::span<const double> predicted) {
    check_pair(actual, predicted, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) s += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    return s / static_cast<double>(actual.size());
}

double mape(std::span<const double> actual, std::span<const double> predicted) {
    check_pair(actual, predicted, "mape");
    double s = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (!(actual[i] > 0.0)) fail(ErrorKind::kInvalidArgument, "mape: actual price must be > 0");
        s += std::abs((actual[i] - predicted[i]) / actual[i]);
    }
    return s / static_cast<double>(actual.size());
}

BacktestSplit make_backtest_split(const domain::EventTable& events, domain::Date split_date, std::size_t test_count,
                                  std::size_t val_count) {
    std::vector<const domain::EventRecord*> sorted;
    for (const domain::EventRecord& e : events.events) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        return a->event_date != b->event_date ? a->event_date < b->event_date : a->event_id < b->event_id;
    });
    const auto first_after = static_cast<std::size_t>(
        std::partition_point(sorted.begin(), sorted.end(), [&](const auto* e) { return e->event_date <= split_date; }) -
        sorted.begin());
    const std::string where = "split date " + domain::format_iso_date(split_date) + ": ";
    if (sorted.size() - first_after < test_count) {
        fail(ErrorKind::kData, where + "only " + std::to_string(sorted.size() - first_after) +
                                   " events after the date, need " + std::to_string(test_count));
    }
    if (first_after < val_count + 1) {
        fail(ErrorKind::kData, where + "only " + std::to_string(first_after) + " events before the date, need " +
                                   std::to_string(val_count) + " for validation plus at least one for training");
    }
    BacktestSplit s;
    s.split_date = split_date;
    for (std::size_t i = 0; i < first_after - val_count; ++i) s.train.push_back(sorted[i]->event_id);
    for (std::size_t i = first_after - val_count; i < first_after; ++i) s.validation.push_back(sorted[i]->event_id);
    for (std::size_t i = first_after; i < first_after + test_count; ++i) s.test.push_back(sorted[i]->event_id);
    return s;
}

std::vector<BacktestSplit> make_backtest_splits(const domain::EventTable& events,
                                                std::span<const domain::Date> split_dates, std::size_t test_count,
                                                std::size_t val_count) {
    std::vector<BacktestSplit> out;
    for (const domain::Date d : split_dates) out.push_back(make_backtest_split(events, d, test_count, val_count));
    return out;
}

std::vector<domain::Date> even_split_dates(const domain::EventTable& events, std::size_t count,
                                           std::size_t test_count, std::size_t val_count, std::size_t min_train) {
    if (count == 0) fail(ErrorKind::kInvalidArgument, "need at least one split");
    std::vector<domain::Date> dates;
    for (const domain::EventRecord& e : events.events) dates.push_back(e.event_date);
    std::sort(dates.begin(), dates.end());
    // p = index of the first test event.
    const std::size_t lo = min_train + val_count;
    if (dates.size() < lo + test_count) {
        fail(ErrorKind::kData, "not enough events (" + std::to_string(dates.size()) + ") for a split with " +
                                   std::to_string(min_train) + " train, " + std::to_string(val_count) +
                                   " validation and " + std::to_string(test_count) + " test events");
    }
    const std::size_t hi = dates.size() - test_count;
    std::vector<domain::Date> out;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t p =
            count == 1 ? hi : lo + static_cast<std::size_t>(std::llround(static_cast<double>(i * (hi - lo)) /
                                                                         static_cast<double>(count - 1)));
        out.push_back(dates[p - 1]);
    }
    return out;
}

std::string_view to_string(Method m) {
    switch (m) {
        case Method::kEtpp:
            return "etpp";
        case Method::kEtpp1:
            return "etpp1";
        case Method::kEtpp2:
            return "etpp2";
        case Method::kEtpp3:
            return "etpp3";
        case Method::kGameMedian:
            return "game_median";
        case Method::kSectionMedian:
            return "section_median";
        case Method::kLinear:
            return "linear";
    }
    return "?";
}

Method parse_method(std::string_view text) {
    for (const Method m : all_methods())
        if (to_string(m) == text) return m;
    fail(ErrorKind::kInvalidArgument, "unknown method '" + std::string(text) + "'");
}

std::vector<Method> parse_methods(std::string_view list) {
    std::vector<Method> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const std::size_t comma = std::min(list.find(',', start), list.size());
        const std::string_view item = list.substr(start, comma - start);
        if (!item.empty()) {
            const Method m = parse_method(item);
            if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
        }
        start = comma + 1;
    }
    if (out.empty()) fail(ErrorKind::kInvalidArgument, "no methods given");
    return out;
}

std::vector<Method> all_methods() {
    return {Method::kEtpp,       Method::kEtpp1,         Method::kEtpp2, Method::kEtpp3,
            Method::kGameMedian, Method::kSectionMedian, Method::kLinear};
}

std::vector<TestEventData> split_test_events(const domain::Dataset& dataset, const BacktestSplit& split) {
    const auto groups = model::transactions_by_event(dataset, split.test);
    std::vector<TestEventData> out;
    for (std::size_t i = 0; i < split.test.size(); ++i) {
        const domain::EventRecord* rec = dataset.events.find(split.test[i]);
        if (rec == nullptr) fail(ErrorKind::kData, "unknown test event '" + split.test[i] + "'");
        const double horizon = static_cast<double>(rec->event_date - split.split_date);
        TestEventData t{split.test[i], {}, {}};
        for (const domain::Transaction& tx : groups[i]) (tx.dte <= horizon ? t.evaluated : t.observed).push_back(tx);
        out.push_back(std::move(t));
    }
    return out;
}

const MethodSummary& BacktestReport::summary(Method m) const {
    for (const MethodSummary& s : methods)
        if (s.method == m) return s;
    fail(ErrorKind::kInvalidArgument, "method '" + std::string(to_string(m)) + "' not in report");
}

std::vector<MethodSummary> aggregate(const std::vector<RunResult>& runs, std::span<const Method> methods,
                                     std::size_t split_count) {
    std::vector<MethodSummary> out;
    for (const Method m : methods) {
        MethodSummary s;
        s.method = m;
        for (std::size_t sp = 0; sp < split_count; ++sp) {
            std::vector<double> e, a;
            for (const RunResult& r : runs) {
                if (r.method != m || r.split != sp) continue;
                if (r.failed) continue;
                e.push_back(r.mse);
                a.push_back(r.mape);
            }
            if (e.empty()) continue;
            s.split_mse.push_back(mean_of(e));
            s.split_mape.push_back(mean_of(a));
        }
        for (const RunResult& r : runs)
            if (r.method == m && r.failed) ++s.failures;
        if (!s.split_mse.empty()) {
            s.mean_mse = mean_of(s.split_mse);
            s.se_mse = standard_error(s.split_mse);
            s.mean_mape = mean_of(s.split_mape);
            s.se_mape = standard_error(s.split_mape);
        } else {
            s.mean_mse = s.mean_mape = std::nan("");
        }
        out.push_back(std::move(s));
    }
    return out;
}

BacktestReport run_backtest(const domain::Dataset& dataset, const BacktestOptions& options) {
    if (options.splits.empty()) fail(ErrorKind::kInvalidArgument, "backtest needs at least one split");
    if (options.methods.empty()) fail(ErrorKind::kInvalidArgument, "backtest needs at least one method");
    if (options.seeds.empty()) fail(ErrorKind::kInvalidArgument, "backtest needs at least one repetition");
    model::validate(options.model);

    std::vector<std::vector<TestEventData>> tests;
    for (const BacktestSplit& s : options.splits) tests.push_back(split_test_events(dataset, s));

    struct Task {
        std::size_t split, method, rep;
    };
    std::vector<Task> tasks;
    for (std::size_t s = 0; s < options.splits.size(); ++s)
        for (std::size_t m = 0; m < options.methods.size(); ++m)
            for (std::size_t r = 0; r < options.seeds.size(); ++r) tasks.push_back({s, m, r});

    std::vector<RunResult> results(tasks.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const Task& t = tasks[i];
            const Method method = options.methods[t.method];
            const std::uint64_t seed = options.seeds[t.rep];
            RunResult r;
            try {
                r = run_one(dataset, options.splits[t.split], tests[t.split], method, seed, options.model);
            } catch (const std::exception& e) {
                r.method = method;
                r.seed = seed;
                r.failed = true;
                r.error = e.what();
                log::warn("backtest run failed (split " + std::to_string(t.split) + ", " +
                          std::string(to_string(method)) + "): " + r.error);
            }
            r.split = t.split;
            r.repetition = t.rep;
            results[i] = std::move(r);
            log::info("split " + std::to_string(t.split) + " " + std::string(to_string(method)) + " rep " +
                      std::to_string(t.rep) + " mape " + std::to_string(results[i].mape));
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, tasks.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }

    BacktestReport report;
    report.runs = std::move(results);
    report.repetitions = options.seeds.size();
    report.reduced = options.seeds.size() < 10;
    report.methods = aggregate(report.runs, options.methods, options.splits.size());

    const json model_cfg = model::config_to_json(options.model);
    domain::Fingerprint cfg_fp;
    cfg_fp.add(model_cfg.dump());
    json splits = json::array();
    for (const BacktestSplit& s : options.splits) {
        splits.push_back({{"split_date", domain::format_iso_date(s.split_date)},
                          {"train", s.train.size()},
                          {"validation", s.validation.size()},
                          {"test", s.test},
                          {"train_fingerprint", hex(domain::fingerprint_events(s.train))}});
    }
    json methods = json::array();
    for (const Method m : options.methods) methods.push_back(std::string(to_string(m)));
    report.metadata = {{"seeds", options.seeds},     {"repetitions", report.repetitions},
                       {"reduced", report.reduced},  {"methods", methods},
                       {"model_config", model_cfg},  {"config_hash", hex(cfg_fp.value())},
                       {"splits", splits}};
    return report;
}

std::vector<SweepRow> bin_sweep(const domain::Dataset& dataset, std::span<const std::size_t> bins,
                                BacktestOptions options) {
    if (bins.size() < 2) fail(ErrorKind::kInvalidArgument, "bin sweep needs at least two values of L");
    options.methods = {Method::kEtpp};
    std::vector<SweepRow> rows;
    for (const std::size_t L : bins) {
        options.model.bins = L;
        const BacktestReport report = run_backtest(dataset, options);
        const MethodSummary& s = report.summary(Method::kEtpp);
        rows.push_back({L, s.mean_mape, s.se_mape, s.mean_mse, s.se_mse});
    }
    return rows;
}

BacktestReport ablation_suite(const domain::Dataset& dataset, BacktestOptions options) {
    options.methods = all_methods();
    return run_backtest(dataset, options);
}

json to_json(const BacktestReport& report) {
    json runs = json::array();
    for (const RunResult& r : report.runs) {
        runs.push_back({{"split", r.split},
                        {"method", std::string(to_string(r.method))},
                        {"repetition", r.repetition},
                        {"seed", r.seed},
                        {"mse", r.failed ? json(nullptr) : json(r.mse)},
                        {"mape", r.failed ? json(nullptr) : json(r.mape)},
                        {"evaluated", r.evaluated},
                        {"failed", r.failed},
                        {"error", r.error},
                        {"fitted_on", hex(r.fitted_on)},
                        {"isolation_ok", r.isolation_ok}});
    }
    json methods = json::array();
    const auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
    for (const MethodSummary& s : report.methods) {
        methods.push_back({{"method", std::string(to_string(s.method))},
                           {"split_mse", s.split_mse},
                           {"split_mape", s.split_mape},
                           {"mean_mse", num(s.mean_mse)},
                           {"se_mse", num(s.se_mse)},
                           {"mean_mape", num(s.mean_mape)},
                           {"se_mape", num(s.se_mape)},
                           {"failures", s.failures}});
    }
    return {{"metadata", report.metadata}, {"repetitions", report.repetitions}, {"reduced", report.reduced},
            {"methods", methods}, {"runs", runs}};
}

std::string runs_csv(const BacktestReport& report) {
    std::ostringstream out;
    out << "split,method,repetition,seed,mse,mape,evaluated,failed,error\n";
    for (const RunResult& r : report.runs) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << r.split << ',' << to_string(r.method) << ',' << r.repetition << ',' << r.seed << ','
            << domain::format_double(r.mse) << ',' << domain::format_double(r.mape) << ',' << r.evaluated << ','
            << (r.failed ? 1 : 0) << ',' << err << '\n';
    }
    return out.str();
}

std::string summary_csv(const BacktestReport& report) {
    std::ostringstream out;
    out << "method,mean_mse,se_mse,mean_mape,se_mape,failures\n";
    for (const MethodSummary& s : report.methods) {
        out << to_string(s.method) << ',' << domain::format_double(s.mean_mse) << ','
            << domain::format_double(s.se_mse) << ',' << domain::format_double(s.mean_mape) << ','
            << domain::format_double(s.se_mape) << ',' << s.failures << '\n';
    }
    return out.str();
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::ostringstream out;
    out << "bins,mean_mape,se_mape,mean_mse,se_mse\n";
    for (const SweepRow& r : rows) {
        out << r.bins << ',' << domain::format_double(r.mean_mape) << ',' << domain::format_double(r.se_mape) << ','
            << domain::format_double(r.mean_mse) << ',' << domain::format_double(r.se_mse) << '\n';
    }
    return out.str();
}

}  // namespace etpp::eval
