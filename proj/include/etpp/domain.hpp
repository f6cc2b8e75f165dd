// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace etpp::domain {

/// One sale. At most one per (event_id, row, col); price is strictly positive.
struct Transaction {
    std::string event_id;
    int row = 0;
    int col = 0;
    double dte = 0.0;  ///< days to event, fractional days allowed
    double price = 0.0;

    friend bool operator==(const Transaction&, const Transaction&) = default;
};

struct Seat {
    int row = 0;
    int col = 0;
    std::string section;

    friend bool operator==(const Seat&, const Seat&) = default;
};

/// Venue geometry. Seat coordinates are unique; seat indices follow input order.
class SeatMap {
   public:
    SeatMap() = default;
    explicit SeatMap(std::vector<Seat> seats);

    [[nodiscard]] std::size_t size() const noexcept { return seats_.size(); }
    [[nodiscard]] const std::vector<Seat>& seats() const noexcept { return seats_; }
    [[nodiscard]] const Seat& seat(std::size_t i) const { return seats_.at(i); }
    [[nodiscard]] std::optional<std::size_t> find(int row, int col) const;
    [[nodiscard]] int max_row() const noexcept { return max_row_; }
    [[nodiscard]] int max_col() const noexcept { return max_col_; }
    [[nodiscard]] int min_row() const noexcept { return min_row_; }
    [[nodiscard]] int min_col() const noexcept { return min_col_; }
    /// Distinct section labels in first-seen order.
    [[nodiscard]] std::vector<std::string> sections() const;

    friend bool operator==(const SeatMap& a, const SeatMap& b) { return a.seats_ == b.seats_; }

   private:
    std::vector<Seat> seats_;
    std::map<std::pair<int, int>, std::size_t> index_;
    int min_row_ = 0, max_row_ = 0, min_col_ = 0, max_col_ = 0;
};

/// Days since 1970-01-01.
using Date = std::int64_t;

Date parse_iso_date(std::string_view text);
std::string format_iso_date(Date date);

/// Raw event row: identifier, date, and attribute strings in table column order.
struct EventRecord {
    std::string event_id;
    Date event_date = 0;
    std::vector<std::string> attributes;

    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

struct EventTable {
    std::vector<std::string> attribute_names;
    std::vector<EventRecord> events;

    [[nodiscard]] const EventRecord* find(std::string_view event_id) const;

    friend bool operator==(const EventTable&, const EventTable&) = default;
};

/// Encoded event: features has length q, identical for every event encoded by
/// one FeatureEncoder.
struct EventInfo {
    std::string event_id;
    Date event_date = 0;
    std::vector<double> features;
};

/// One-hot encoding of categorical columns, pass-through of numeric ones.
/// A column is numeric iff every training value parses as a finite number.
class FeatureEncoder {
   public:
    struct Column {
        std::string name;
        bool categorical = false;
        std::vector<std::string> levels;  ///< sorted, categorical only

        friend bool operator==(const Column&, const Column&) = default;
    };

    FeatureEncoder() = default;
    explicit FeatureEncoder(std::vector<Column> columns) : columns_(std::move(columns)) {}

    static FeatureEncoder fit(const EventTable& table, std::span<const std::string> event_ids);
    static FeatureEncoder fit(const EventTable& table);

    /// Unseen categorical levels map to an all-zero group (and are logged).
    [[nodiscard]] EventInfo transform(const EventRecord& record) const;
    [[nodiscard]] std::size_t width() const;
    [[nodiscard]] std::vector<std::string> feature_names() const;
    [[nodiscard]] const std::vector<Column>& columns() const noexcept { return columns_; }

    friend bool operator==(const FeatureEncoder&, const FeatureEncoder&) = default;

   private:
    std::vector<Column> columns_;
};

/// 64-bit FNV-1a content fingerprint used to tie fitted statistics to the
/// exact data they were fitted on.
class Fingerprint {
   public:
    Fingerprint& add(std::string_view bytes);
    Fingerprint& add(double value);
    Fingerprint& add(std::int64_t value);
    [[nodiscard]] std::uint64_t value() const noexcept { return hash_; }

   private:
    std::uint64_t hash_ = 14695981039346656037ULL;
};

/// Fingerprint of a set of events (order-insensitive).
std::uint64_t fingerprint_events(std::vector<std::string> event_ids);

/// z = (x - mean) / stdev with the population stdev.
struct Standardizer {
    double mean = 0.0;
    double stdev = 1.0;
    std::uint64_t fitted_on = 0;

    [[nodiscard]] double standardize(double x) const noexcept { return (x - mean) / stdev; }
    [[nodiscard]] double destandardize(double z) const noexcept { return z * stdev + mean; }

    friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

/// Rejects empty input and zero variance.
Standardizer fit_standardizer(std::span<const double> values, std::uint64_t fitted_on = 0);

/// Per-column standardization of encoded event features. Constant columns are
/// centered only (stdev 1) rather than rejected.
struct FeatureScaler {
    std::vector<Standardizer> columns;

    static FeatureScaler fit(std::span<const EventInfo> events, std::uint64_t fitted_on);
    [[nodiscard]] std::vector<double> apply(std::span<const double> features) const;

    friend bool operator==(const FeatureScaler&, const FeatureScaler&) = default;
};

struct Dataset {
    std::vector<Transaction> transactions;
    EventTable events;
    SeatMap seat_map;

    /// Events sorted by (date, id).
    [[nodiscard]] std::vector<const EventRecord*> events_by_date() const;
    /// Transactions of one event in file order.
    [[nodiscard]] std::vector<Transaction> transactions_of(std::string_view event_id) const;
};

// CSV ingestion. Every loader either returns the full file or throws with a
// "<path>:<line>: " located diagnostic.
std::vector<Transaction> load_transactions(const std::filesystem::path& path);
EventTable load_events(const std::filesystem::path& path);
SeatMap load_seat_map(const std::filesystem::path& path);
/// transactions.csv, events.csv, seatmap.csv from one directory, cross-validated.
Dataset load_dataset(const std::filesystem::path& dir);

/// Cross-file checks: every transaction references a known event and seat, and
/// no (event, seat) pair sells twice.
void validate(const Dataset& dataset);

std::string to_csv(std::span<const Transaction> transactions);
std::string to_csv(const EventTable& events);
std::string to_csv(const SeatMap& seat_map);
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace etpp::domain
