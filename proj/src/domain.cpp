// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/domain.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "etpp/error.hpp"
#include "etpp/io.hpp"
#include "etpp/log.hpp"

namespace etpp::domain {
namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(std::move(line));
        start = end + 1;
    }
    return out;
}

bool blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

[[noreturn]] void fail_at(const std::filesystem::path& path, std::size_t line, const std::string& message) {
    fail(ErrorKind::kParse, path.string() + ":" + std::to_string(line) + ": " + message);
}

void expect_header(const std::filesystem::path& path, const std::vector<std::string>& lines,
                   const std::vector<std::string>& expected_prefix) {
    if (lines.empty()) fail_at(path, 1, "missing header");
    const std::vector<std::string> header = io::split_csv_line(lines[0]);
    if (header.size() < expected_prefix.size() ||
        !std::equal(expected_prefix.begin(), expected_prefix.end(), header.begin())) {
        std::string want;
        for (const auto& h : expected_prefix) want += (want.empty() ? "" : ",") + h;
        fail_at(path, 1, "expected header starting with '" + want + "', got '" + lines[0] + "'");
    }
}

template <typename Fn>
auto located(const std::filesystem::path& path, std::size_t line, Fn fn) {
    try {
        return fn();
    } catch (const Error& e) {
        fail_at(path, line, e.what());
    }
}

bool is_number(std::string_view s) {
    if (s.empty()) return false;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(v);
}

}  // namespace

// ---------------------------------------------------------------- SeatMap

SeatMap::SeatMap(std::vector<Seat> seats) : seats_(std::move(seats)) {
    if (seats_.empty()) return;
    min_row_ = max_row_ = seats_[0].row;
    min_col_ = max_col_ = seats_[0].col;
    for (std::size_t i = 0; i < seats_.size(); ++i) {
        const Seat& s = seats_[i];
        if (!index_.emplace(std::make_pair(s.row, s.col), i).second) {
            fail(ErrorKind::kData, "duplicate seat (" + std::to_string(s.row) + "," + std::to_string(s.col) + ")");
        }
        min_row_ = std::min(min_row_, s.row);
        max_row_ = std::max(max_row_, s.row);
        min_col_ = std::min(min_col_, s.col);
        max_col_ = std::max(max_col_, s.col);
    }
}

std::optional<std::size_t> SeatMap::find(int row, int col) const {
    const auto it = index_.find({row, col});
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> SeatMap::sections() const {
    std::vector<std::string> out;
    for (const Seat& s : seats_) {
        if (std::find(out.begin(), out.end(), s.section) == out.end()) out.push_back(s.section);
    }
    return out;
}

// ---------------------------------------------------------------- dates

Date parse_iso_date(std::string_view text) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        fail(ErrorKind::kParse, "invalid ISO-8601 date '" + std::string(text) + "'");
    }
    const auto num = [&](std::size_t pos, std::size_t len, auto& out) {
        const auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
        if (ec != std::errc() || ptr != text.data() + pos + len) {
            fail(ErrorKind::kParse, "invalid ISO-8601 date '" + std::string(text) + "'");
        }
    };
    num(0, 4, y);
    num(5, 2, m);
    num(8, 2, d);
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) fail(ErrorKind::kParse, "invalid calendar date '" + std::string(text) + "'");
    return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

std::string format_iso_date(Date date) {
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{date}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

const EventRecord* EventTable::find(std::string_view event_id) const {
    for (const EventRecord& e : events) {
        if (e.event_id == event_id) return &e;
    }
    return nullptr;
}

// ---------------------------------------------------------------- encoder

FeatureEncoder FeatureEncoder::fit(const EventTable& table, std::span<const std::string> event_ids) {
    std::vector<const EventRecord*> rows;
    for (const std::string& id : event_ids) {
        const EventRecord* rec = table.find(id);
        if (rec == nullptr) fail(ErrorKind::kData, "encoder fit: unknown event '" + id + "'");
        rows.push_back(rec);
    }
    std::vector<Column> columns;
    for (std::size_t c = 0; c < table.attribute_names.size(); ++c) {
        Column col;
        col.name = table.attribute_names[c];
        col.categorical = !std::all_of(rows.begin(), rows.end(),
                                       [c](const EventRecord* r) { return is_number(r->attributes.at(c)); });
        if (col.categorical) {
            std::set<std::string> levels;
            for (const EventRecord* r : rows) levels.insert(r->attributes.at(c));
            col.levels.assign(levels.begin(), levels.end());
        }
        columns.push_back(std::move(col));
    }
    return FeatureEncoder(std::move(columns));
}

FeatureEncoder FeatureEncoder::fit(const EventTable& table) {
    std::vector<std::string> ids;
    for (const EventRecord& e : table.events) ids.push_back(e.event_id);
    return fit(table, ids);
}

EventInfo FeatureEncoder::transform(const EventRecord& record) const {
    if (record.attributes.size() != columns_.size()) {
        fail(ErrorKind::kData, "event '" + record.event_id + "' has " + std::to_string(record.attributes.size()) +
                                   " attributes, encoder expects " + std::to_string(columns_.size()));
    }
    EventInfo info;
    info.event_id = record.event_id;
    info.event_date = record.event_date;
    info.features.reserve(width());
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        const Column& col = columns_[c];
        const std::string& raw = record.attributes[c];
        if (!col.categorical) {
            if (!is_number(raw)) {
                fail(ErrorKind::kData, "event '" + record.event_id + "': column '" + col.name +
                                           "' expects a number, got '" + raw + "'");
            }
            info.features.push_back(io::parse_double(raw, col.name));
            continue;
        }
        const auto it = std::find(col.levels.begin(), col.levels.end(), raw);
        if (it == col.levels.end()) {
            log::warn("event '" + record.event_id + "': unseen level '" + raw + "' in column '" + col.name +
                      "' encoded as all zeros");
        }
        for (const std::string& level : col.levels) info.features.push_back(level == raw ? 1.0 : 0.0);
    }
    return info;
}

std::size_t FeatureEncoder::width() const {
    std::size_t q = 0;
    for (const Column& c : columns_) q += c.categorical ? c.levels.size() : 1;
    return q;
}

std::vector<std::string> FeatureEncoder::feature_names() const {
    std::vector<std::string> names;
    for (const Column& c : columns_) {
        if (!c.categorical) {
            names.push_back(c.name);
            continue;
        }
        for (const std::string& level : c.levels) names.push_back(c.name + "=" + level);
    }
    return names;
}

// ---------------------------------------------------------------- fingerprint

Fingerprint& Fingerprint::add(std::string_view bytes) {
    for (const char ch : bytes) {
        hash_ ^= static_cast<unsigned char>(ch);
        hash_ *= 1099511628211ULL;
    }
    // Length-delimit so ("ab","c") and ("a","bc") differ.
    hash_ ^= 0xff;
    hash_ *= 1099511628211ULL;
    return *this;
}

Fingerprint& Fingerprint::add(double value) {
    char buf[sizeof(double)];
    std::memcpy(buf, &value, sizeof buf);
    return add(std::string_view(buf, sizeof buf));
}

Fingerprint& Fingerprint::add(std::int64_t value) {
    char buf[sizeof(value)];
    std::memcpy(buf, &value, sizeof buf);
    return add(std::string_view(buf, sizeof buf));
}

std::uint64_t fingerprint_events(std::vector<std::string> event_ids) {
    std::sort(event_ids.begin(), event_ids.end());
    Fingerprint fp;
    for (const std::string& id : event_ids) fp.add(id);
    return fp.value();
}

// ---------------------------------------------------------------- standardizer

Standardizer fit_standardizer(std::span<const double> values, std::uint64_t fitted_on) {
    if (values.empty()) fail(ErrorKind::kInvalidArgument, "cannot fit a standardizer on no values");
    double mean = 0.0;
    for (const double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (const double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    if (!(var > 0.0)) fail(ErrorKind::kInvalidArgument, "cannot fit a standardizer on zero-variance values");
    return Standardizer{mean, std::sqrt(var), fitted_on};
}

FeatureScaler FeatureScaler::fit(std::span<const EventInfo> events, std::uint64_t fitted_on) {
    FeatureScaler scaler;
    if (events.empty()) return scaler;
    const std::size_t q = events.front().features.size();
    for (std::size_t c = 0; c < q; ++c) {
        std::vector<double> column;
        for (const EventInfo& e : events) column.push_back(e.features.at(c));
        const bool constant = std::all_of(column.begin(), column.end(), [&](double v) { return v == column[0]; });
        if (constant) {
            scaler.columns.push_back(Standardizer{column[0], 1.0, fitted_on});
        } else {
            scaler.columns.push_back(fit_standardizer(column, fitted_on));
        }
    }
    return scaler;
}

std::vector<double> FeatureScaler::apply(std::span<const double> features) const {
    if (features.size() != columns.size()) {
        fail(ErrorKind::kShape, "feature width " + std::to_string(features.size()) + " != scaler width " +
                                    std::to_string(columns.size()));
    }
    std::vector<double> out(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) out[i] = columns[i].standardize(features[i]);
    return out;
}

// ---------------------------------------------------------------- dataset

std::vector<const EventRecord*> Dataset::events_by_date() const {
    std::vector<const EventRecord*> out;
    for (const EventRecord& e : events.events) out.push_back(&e);
    std::sort(out.begin(), out.end(), [](const EventRecord* a, const EventRecord* b) {
        return std::tie(a->event_date, a->event_id) < std::tie(b->event_date, b->event_id);
    });
    return out;
}

std::vector<Transaction> Dataset::transactions_of(std::string_view event_id) const {
    std::vector<Transaction> out;
    for (const Transaction& t : transactions) {
        if (t.event_id == event_id) out.push_back(t);
    }
    return out;
}

std::vector<Transaction> load_transactions(const std::filesystem::path& path) {
    const std::vector<std::string> lines = split_lines(io::read_text_file(path));
    expect_header(path, lines, {"event_id", "row", "col", "dte", "price"});
    std::vector<Transaction> out;
    std::set<std::tuple<std::string, int, int>> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (blank(lines[i])) continue;
        const std::size_t line_no = i + 1;
        const std::vector<std::string> f = io::split_csv_line(lines[i]);
        if (f.size() != 5) fail_at(path, line_no, "expected 5 fields, got " + std::to_string(f.size()));
        Transaction t;
        t.event_id = f[0];
        if (t.event_id.empty()) fail_at(path, line_no, "empty event_id");
        located(path, line_no, [&] {
            t.row = static_cast<int>(io::parse_int(f[1], "row"));
            t.col = static_cast<int>(io::parse_int(f[2], "col"));
            t.dte = io::parse_double(f[3], "dte");
            t.price = io::parse_double(f[4], "price");
            return 0;
        });
        if (t.row < 1 || t.col < 1) fail_at(path, line_no, "row and col must be >= 1");
        if (!std::isfinite(t.dte) || t.dte < 0.0) fail_at(path, line_no, "dte must be finite and >= 0");
        if (!std::isfinite(t.price) || t.price <= 0.0) fail_at(path, line_no, "price must be finite and > 0");
        if (!seen.emplace(t.event_id, t.row, t.col).second) {
            fail_at(path, line_no, "duplicate sale of seat (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                                       ") for event '" + t.event_id + "'");
        }
        out.push_back(std::move(t));
    }
    return out;
}

EventTable load_events(const std::filesystem::path& path) {
    const std::vector<std::string> lines = split_lines(io::read_text_file(path));
    expect_header(path, lines, {"event_id", "event_date"});
    EventTable table;
    const std::vector<std::string> header = io::split_csv_line(lines[0]);
    table.attribute_names.assign(header.begin() + 2, header.end());
    std::set<std::string> ids;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (blank(lines[i])) continue;
        const std::size_t line_no = i + 1;
        const std::vector<std::string> f = io::split_csv_line(lines[i]);
        if (f.size() != header.size()) {
            fail_at(path, line_no,
                    "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
        }
        EventRecord rec;
        rec.event_id = f[0];
        if (rec.event_id.empty()) fail_at(path, line_no, "empty event_id");
        if (!ids.insert(rec.event_id).second) fail_at(path, line_no, "duplicate event_id '" + rec.event_id + "'");
        rec.event_date = located(path, line_no, [&] { return parse_iso_date(f[1]); });
        rec.attributes.assign(f.begin() + 2, f.end());
        table.events.push_back(std::move(rec));
    }
    return table;
}

SeatMap load_seat_map(const std::filesystem::path& path) {
    const std::vector<std::string> lines = split_lines(io::read_text_file(path));
    expect_header(path, lines, {"row", "col", "section"});
    std::vector<Seat> seats;
    std::set<std::pair<int, int>> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (blank(lines[i])) continue;
        const std::size_t line_no = i + 1;
        const std::vector<std::string> f = io::split_csv_line(lines[i]);
        if (f.size() != 3) fail_at(path, line_no, "expected 3 fields, got " + std::to_string(f.size()));
        Seat s;
        located(path, line_no, [&] {
            s.row = static_cast<int>(io::parse_int(f[0], "row"));
            s.col = static_cast<int>(io::parse_int(f[1], "col"));
            return 0;
        });
        s.section = f[2];
        if (s.row < 1 || s.col < 1) fail_at(path, line_no, "row and col must be >= 1");
        if (!seen.emplace(s.row, s.col).second) {
            fail_at(path, line_no, "duplicate seat (" + std::to_string(s.row) + "," + std::to_string(s.col) + ")");
        }
        seats.push_back(std::move(s));
    }
    if (seats.empty()) fail_at(path, 1, "seat map has no seats");
    return SeatMap(std::move(seats));
}

void validate(const Dataset& dataset) {
    std::set<std::string> ids;
    for (const EventRecord& e : dataset.events.events) ids.insert(e.event_id);
    std::set<std::tuple<std::string, int, int>> seen;
    for (const Transaction& t : dataset.transactions) {
        if (!ids.count(t.event_id)) fail(ErrorKind::kData, "transaction references unknown event '" + t.event_id + "'");
        if (!dataset.seat_map.find(t.row, t.col)) {
            fail(ErrorKind::kData, "transaction of event '" + t.event_id + "' references unknown seat (" +
                                       std::to_string(t.row) + "," + std::to_string(t.col) + ")");
        }
        if (!seen.emplace(t.event_id, t.row, t.col).second) {
            fail(ErrorKind::kData, "duplicate sale of seat (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                                       ") for event '" + t.event_id + "'");
        }
        if (!(t.price > 0.0)) fail(ErrorKind::kData, "non-positive price for event '" + t.event_id + "'");
    }
}

Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    ds.transactions = load_transactions(dir / "transactions.csv");
    ds.events = load_events(dir / "events.csv");
    ds.seat_map = load_seat_map(dir / "seatmap.csv");
    validate(ds);
    return ds;
}

std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) fail(ErrorKind::kInvalidArgument, "cannot format number");
    return std::string(buf, ptr);
}

std::string to_csv(std::span<const Transaction> transactions) {
    std::string out = "event_id,row,col,dte,price\n";
    for (const Transaction& t : transactions) {
        out += t.event_id + "," + std::to_string(t.row) + "," + std::to_string(t.col) + "," + format_double(t.dte) +
               "," + format_double(t.price) + "\n";
    }
    return out;
}

std::string to_csv(const EventTable& events) {
    std::string out = "event_id,event_date";
    for (const std::string& name : events.attribute_names) out += "," + name;
    out += "\n";
    for (const EventRecord& e : events.events) {
        out += e.event_id + "," + format_iso_date(e.event_date);
        for (const std::string& a : e.attributes) out += "," + a;
        out += "\n";
    }
    return out;
}

std::string to_csv(const SeatMap& seat_map) {
    std::string out = "row,col,section\n";
    for (const Seat& s : seat_map.seats()) {
        out += std::to_string(s.row) + "," + std::to_string(s.col) + "," + s.section + "\n";
    }
    return out;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    io::write_text_file(dir / "transactions.csv", to_csv(dataset.transactions));
    io::write_text_file(dir / "events.csv", to_csv(dataset.events));
    io::write_text_file(dir / "seatmap.csv", to_csv(dataset.seat_map));
}

}  // namespace etpp::domain
