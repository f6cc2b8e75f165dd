// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>
#include <sstream>
#include <thread>

#include "etpp/error.hpp"
#include "etpp/eval.hpp"
#include "etpp/io.hpp"
#include "etpp/log.hpp"
#include "etpp/model/checkpoint.hpp"
#include "etpp/model/train.hpp"

namespace etpp::cli {
namespace {

using nlohmann::json;

constexpr std::size_t kValidationEvents = 10;

std::vector<std::size_t> parse_bins(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const long long v = io::parse_int(item, "--bins");
        if (v < 1) fail(ErrorKind::kInvalidArgument, "--bins values must be >= 1, got " + item);
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) fail(ErrorKind::kInvalidArgument, "--bins needs at least one value");
    return out;
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        fail(ErrorKind::kIo, "cannot create output directory '" + dir.string() + "'");
    }
}

void require_dir(const std::filesystem::path& dir, const char* flag) {
    if (dir.empty()) fail(ErrorKind::kInvalidArgument, std::string(flag) + " is required");
    if (!std::filesystem::is_directory(dir)) fail(ErrorKind::kIo, "data directory '" + dir.string() + "' does not exist");
}

std::size_t worker_count(const RunConfig& c) {
    if (c.workers > 0) return c.workers;
    return std::max(1u, std::thread::hardware_concurrency());
}

std::string history_csv(const model::TrainSummary& s) {
    std::string out = "epoch,train_loss,val_loss\n";
    for (const model::EpochRecord& r : s.history) {
        out += std::to_string(r.epoch) + "," + domain::format_double(r.train_loss) + "," +
               domain::format_double(r.val_loss) + "\n";
    }
    return out;
}

// --- commands ---------------------------------------------------------------

void cmd_synth(const RunConfig& c, std::ostream& out) {
    synth::SynthConfig sc = c.synth;
    if (c.seed) sc.seed = *c.seed;
    synth::validate(sc);
    ensure_dir(c.out_dir);
    const domain::Dataset ds = synth::generate(sc);
    synth::write(ds, sc, c.out_dir);
    const synth::Summary s = synth::describe(ds);
    io::write_text_file(c.out_dir / "summary.json", synth::to_json(s).dump(2) + "\n");
    std::string hist = "dte_day,transactions\n";
    for (std::size_t d = 0; d < s.dte_histogram.size(); ++d)
        hist += std::to_string(d) + "," + std::to_string(s.dte_histogram[d]) + "\n";
    io::write_text_file(c.out_dir / "dte_histogram.csv", hist);
    out << "synth: " << s.events << " events, " << s.seats << " seats, " << s.transactions
        << " transactions (sale rate " << domain::format_double(s.sale_rate) << ") -> " << c.out_dir.string() << "\n";
}

void cmd_train(const RunConfig& c, std::ostream& out) {
    require_dir(c.data_dir, "--data");
    model::ModelConfig mc = c.model;
    if (c.seed) mc.seed = *c.seed;
    model::validate(mc);
    const domain::Dataset ds = domain::load_dataset(c.data_dir);
    const auto events = ds.events_by_date();
    if (events.size() < kValidationEvents + 1) {
        fail(ErrorKind::kData, "training needs at least " + std::to_string(kValidationEvents + 1) + " events, found " +
                                   std::to_string(events.size()));
    }
    std::vector<std::string> train, val;
    for (std::size_t i = 0; i < events.size(); ++i)
        (i + kValidationEvents < events.size() ? train : val).push_back(events[i]->event_id);
    ensure_dir(c.out_dir);
    const model::Model m = model::fit_model(ds, train, val, mc);
    const std::filesystem::path ckpt = c.checkpoint.empty() ? c.out_dir / "model.etpp" : c.checkpoint;
    model::save_checkpoint(ckpt, m);
    io::write_text_file(c.out_dir / "history.csv", history_csv(m.summary));
    json meta = {{"run_config", to_json(c)},
                 {"model_config", model::config_to_json(mc)},
                 {"train_events", train.size()},
                 {"validation_events", val.size()},
                 {"epochs_completed", m.summary.history.size()},
                 {"best_epoch", m.summary.best_epoch},
                 {"best_val_loss", m.summary.best_val_loss},
                 {"stopped_early", m.summary.stopped_early},
                 {"halted", m.summary.halted},
                 {"halt_reason", m.summary.halt_reason}};
    io::write_text_file(c.out_dir / "train.json", meta.dump(2) + "\n");
    out << "train: " << m.summary.history.size() << " epochs, best epoch " << m.summary.best_epoch
        << ", val loss " << domain::format_double(m.summary.best_val_loss) << " -> " << ckpt.string() << "\n";
    if (m.summary.halted) fail(ErrorKind::kNumeric, "training halted: " + m.summary.halt_reason);
}

std::string attribute_text(const json& v, const std::string& name) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return domain::format_double(v.get<double>());
    fail(ErrorKind::kParse, "query: attribute '" + name + "' must be a string or number");
}

void cmd_predict(const RunConfig& c, std::ostream& out) {
    if (c.checkpoint.empty()) fail(ErrorKind::kInvalidArgument, "--checkpoint is required");
    if (c.query.empty()) fail(ErrorKind::kInvalidArgument, "--query is required");
    const model::Model m = model::load_checkpoint(c.checkpoint);
    const std::string text = io::read_text_file(c.query);
    std::string csv = "row,col,dte,predicted_price\n";
    const bool blank = std::all_of(text.begin(), text.end(), [](unsigned char ch) { return std::isspace(ch) != 0; });
    std::size_t count = 0;
    if (!blank) {
        json q;
        try {
            q = json::parse(text);
        } catch (const json::exception& e) {
            fail(ErrorKind::kParse, c.query.string() + ": " + e.what());
        }
        try {
            std::vector<model::SeatQuery> queries;
            for (const json& s : q.value("seats", json::array()))
                queries.push_back({s.at("row").get<int>(), s.at("col").get<int>(), s.at("dte").get<double>()});
            if (!queries.empty()) {
                const json& ev = q.at("event");
                domain::EventRecord rec;
                rec.event_id = ev.value("event_id", std::string("query"));
                rec.event_date = ev.contains("event_date") ? domain::parse_iso_date(ev.at("event_date").get<std::string>()) : 0;
                const json& attrs = ev.value("attributes", json::object());
                for (const auto& col : m.prep.encoder.columns()) {
                    if (!attrs.contains(col.name)) fail(ErrorKind::kData, "query event is missing attribute '" + col.name + "'");
                    rec.attributes.push_back(attribute_text(attrs.at(col.name), col.name));
                }
                std::vector<domain::Transaction> partial;
                for (const json& t : q.value("transactions", json::array())) {
                    partial.push_back({rec.event_id, t.at("row").get<int>(), t.at("col").get<int>(),
                                       t.at("dte").get<double>(), t.at("price").get<double>()});
                }
                const std::vector<double> prices = model::predict(m, rec, partial, queries);
                for (std::size_t i = 0; i < queries.size(); ++i) {
                    csv += std::to_string(queries[i].row) + "," + std::to_string(queries[i].col) + "," +
                           domain::format_double(queries[i].dte) + "," + domain::format_double(prices[i]) + "\n";
                }
                count = queries.size();
            }
        } catch (const json::exception& e) {
            fail(ErrorKind::kParse, c.query.string() + ": " + e.what());
        }
    }
    ensure_dir(c.out_dir);
    io::write_text_file(c.out_dir / "predictions.csv", csv);
    out << "predict: " << count << " seats -> " << (c.out_dir / "predictions.csv").string() << "\n";
}

eval::BacktestOptions backtest_options(const RunConfig& c, const domain::Dataset& ds) {
    if (c.reps == 0) fail(ErrorKind::kInvalidArgument, "--reps must be >= 1");
    eval::BacktestOptions o;
    o.methods = eval::parse_methods(c.methods);
    o.splits = eval::make_backtest_splits(ds.events, eval::even_split_dates(ds.events, c.splits));
    const std::uint64_t first = c.seed.value_or(c.model.seed);
    for (std::size_t r = 0; r < c.reps; ++r) o.seeds.push_back(first + r);
    o.model = c.model;
    o.workers = worker_count(c);
    return o;
}

void print_summary(const eval::BacktestReport& r, std::ostream& out) {
    out << "method          mean_mape  se_mape    mean_mse     se_mse  failures\n";
    for (const eval::MethodSummary& s : r.methods) {
        char line[160];
        std::snprintf(line, sizeof line, "%-15s %9.4f %8.4f %11.3f %10.3f  %zu\n", std::string(eval::to_string(s.method)).c_str(),
                      s.mean_mape, s.se_mape, s.mean_mse, s.se_mse, s.failures);
        out << line;
    }
    if (r.reduced) out << "(reduced run: " << r.repetitions << " repetitions)\n";
}

void cmd_backtest(const RunConfig& c, std::ostream& out) {
    require_dir(c.data_dir, "--data");
    RunConfig rc = c;
    if (!c.bins.empty()) {
        if (c.bins.size() != 1) fail(ErrorKind::kInvalidArgument, "backtest takes a single --bins value; use sweep for lists");
        rc.model.bins = c.bins.front();
    }
    model::validate(rc.model);
    const domain::Dataset ds = domain::load_dataset(c.data_dir);
    const eval::BacktestOptions o = backtest_options(rc, ds);
    ensure_dir(c.out_dir);
    eval::BacktestReport r = eval::run_backtest(ds, o);
    r.metadata["run_config"] = to_json(rc);
    io::write_text_file(c.out_dir / "backtest.json", eval::to_json(r).dump(2) + "\n");
    io::write_text_file(c.out_dir / "backtest_runs.csv", eval::runs_csv(r));
    io::write_text_file(c.out_dir / "backtest_summary.csv", eval::summary_csv(r));
    print_summary(r, out);
    for (const eval::RunResult& run : r.runs)
        if (!run.failed && !run.isolation_ok) fail(ErrorKind::kData, "test-set isolation check failed");
}

void cmd_sweep(const RunConfig& c, std::ostream& out) {
    require_dir(c.data_dir, "--data");
    const std::vector<std::size_t> bins = c.bins.empty() ? std::vector<std::size_t>{2, 5, 10, 20, 40, 60} : c.bins;
    const domain::Dataset ds = domain::load_dataset(c.data_dir);
    const eval::BacktestOptions o = backtest_options(c, ds);
    ensure_dir(c.out_dir);
    const std::vector<eval::SweepRow> rows = eval::bin_sweep(ds, bins, o);
    json table = json::array();
    for (const eval::SweepRow& row : rows) {
        table.push_back({{"bins", row.bins},
                         {"mean_mape", row.mean_mape},
                         {"se_mape", row.se_mape},
                         {"mean_mse", row.mean_mse},
                         {"se_mse", row.se_mse}});
    }
    const json doc = {{"run_config", to_json(c)}, {"repetitions", o.seeds.size()}, {"reduced", o.seeds.size() < 10},
                      {"rows", table}};
    io::write_text_file(c.out_dir / "sweep.json", doc.dump(2) + "\n");
    io::write_text_file(c.out_dir / "sweep.csv", eval::sweep_csv(rows));
    out << "bins  mean_mape  se_mape\n";
    for (const eval::SweepRow& row : rows) {
        char line[80];
        std::snprintf(line, sizeof line, "%4zu %10.4f %8.4f\n", row.bins, row.mean_mape, row.se_mape);
        out << line;
    }
}

}  // namespace

json to_json(const RunConfig& c) {
    json j = {{"command", c.command},
              {"data", c.data_dir.string()},
              {"out", c.out_dir.string()},
              {"checkpoint", c.checkpoint.string()},
              {"query", c.query.string()},
              {"seed", c.seed ? json(*c.seed) : json(nullptr)},
              {"reps", c.reps},
              {"splits", c.splits},
              {"methods", c.methods},
              {"bins", c.bins},
              {"workers", c.workers},
              {"verbose", c.verbose},
              {"model", model::config_to_json(c.model)},
              {"synth", synth::to_json(c.synth)}};
    return j;
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
    if (!j.is_object()) fail(ErrorKind::kParse, "run config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "command") c.command = v.get<std::string>();
            else if (key == "data") c.data_dir = v.get<std::string>();
            else if (key == "out") c.out_dir = v.get<std::string>();
            else if (key == "checkpoint") c.checkpoint = v.get<std::string>();
            else if (key == "query") c.query = v.get<std::string>();
            else if (key == "seed") c.seed = v.is_null() ? std::nullopt : std::optional(v.get<std::uint64_t>());
            else if (key == "reps") c.reps = v.get<std::size_t>();
            else if (key == "splits") c.splits = v.get<std::size_t>();
            else if (key == "methods") c.methods = v.get<std::string>();
            else if (key == "bins") c.bins = v.get<std::vector<std::size_t>>();
            else if (key == "workers") c.workers = v.get<std::size_t>();
            else if (key == "verbose") c.verbose = v.get<bool>();
            else if (key == "model") c.model = model::config_from_json(v, c.model);
            else if (key == "synth") c.synth = synth::config_from_json(v, c.synth);
            else fail(ErrorKind::kParse, "unknown run config key '" + key + "'");
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::kParse, std::string("run config: ") + e.what());
    }
    return c;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Event-ticket price prediction: synthetic data, training, prediction and backtests", "etpp"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Print help for every command");
    app.fallthrough();

    std::string config_path, out_dir, data_dir, checkpoint, query, methods, bins, variant;
    std::uint64_t seed = 0;
    std::size_t reps = 0, workers = 0, events = 0, epochs = 0, splits = 0;
    bool verbose = false;
    app.add_option("--config", config_path, "JSON run config (flags override it)");
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--out", out_dir, "Output directory");
    app.add_flag("--verbose", verbose, "Log progress");

    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic ticket market");
    synth_cmd->add_option("--events", events, "Number of events");

    CLI::App* train_cmd = app.add_subcommand("train", "Train a model on a dataset directory");
    CLI::App* predict_cmd = app.add_subcommand("predict", "Predict seat prices from a checkpoint");
    CLI::App* backtest_cmd = app.add_subcommand("backtest", "Rolling-split backtest of several methods");
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Backtest full ETPP over several bin counts");

    for (CLI::App* cmd : {train_cmd, backtest_cmd, sweep_cmd}) {
        cmd->add_option("--data", data_dir, "Dataset directory (transactions.csv, events.csv, seatmap.csv)");
        cmd->add_option("--epochs", epochs, "Training epochs");
    }
    train_cmd->add_option("--bins", bins, "Time bins L");
    train_cmd->add_option("--variant", variant, "etpp, etpp1, etpp2 or etpp3");
    train_cmd->add_option("--checkpoint", checkpoint, "Checkpoint path (default <out>/model.etpp)");
    predict_cmd->add_option("--checkpoint", checkpoint, "Checkpoint written by train");
    predict_cmd->add_option("--query", query, "JSON query file");
    for (CLI::App* cmd : {backtest_cmd, sweep_cmd}) {
        cmd->add_option("--reps", reps, "Repetitions (seeds) per method and split");
        cmd->add_option("--workers", workers, "Worker threads (default: all cores)");
        cmd->add_option("--splits", splits, "Number of evenly spaced split dates");
    }
    backtest_cmd->add_option("--methods", methods, "Comma-separated methods");
    backtest_cmd->add_option("--bins", bins, "Time bins L");
    backtest_cmd->add_option("--variant", variant, "Variant for every ETPP run's base config");
    sweep_cmd->add_option("--bins", bins, "Comma-separated list of L values");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error[usage]: " << e.what() << "\n";
        return 2;
    }

    try {
        RunConfig c;
        if (!config_path.empty()) c = run_config_from_json(json::parse(io::read_text_file(config_path), nullptr, true), c);
        c.command = app.get_subcommands().front()->get_name();
        const auto given = [&](const char* flag) {
            for (const CLI::App* a : std::initializer_list<const CLI::App*>{&app, app.get_subcommands().front()}) {
                const CLI::Option* o = a->get_option_no_throw(flag);
                if (o != nullptr && o->count() > 0) return true;
            }
            return false;
        };
        if (given("--seed")) c.seed = seed;
        if (given("--out")) c.out_dir = out_dir;
        if (given("--verbose")) c.verbose = verbose;
        if (given("--data")) c.data_dir = data_dir;
        if (given("--checkpoint")) c.checkpoint = checkpoint;
        if (given("--query")) c.query = query;
        if (given("--reps")) c.reps = reps;
        if (given("--workers")) c.workers = workers;
        if (given("--splits")) c.splits = splits;
        if (given("--methods")) c.methods = methods;
        if (given("--events")) c.synth.events = events;
        if (given("--epochs")) c.model.epochs = epochs;
        if (given("--bins")) c.bins = parse_bins(bins);
        if (given("--variant")) c.model = model::with_variant(c.model, model::parse_variant(variant));
        if (c.command == "train" && !c.bins.empty()) {
            if (c.bins.size() != 1) fail(ErrorKind::kInvalidArgument, "train takes a single --bins value");
            c.model.bins = c.bins.front();
        }
        log::set_level(c.verbose ? log::Level::kInfo : log::Level::kWarn);

        if (c.command == "synth") cmd_synth(c, out);
        else if (c.command == "train") cmd_train(c, out);
        else if (c.command == "predict") cmd_predict(c, out);
        else if (c.command == "backtest") cmd_backtest(c, out);
        else cmd_sweep(c, out);
        return 0;
    } catch (const Error& e) {
        err << "error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
    } catch (const json::exception& e) {
        err << "error[parse]: " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "error[internal]: " << e.what() << "\n";
    }
    return 1;
}

}  // namespace etpp::cli
