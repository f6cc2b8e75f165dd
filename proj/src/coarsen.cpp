// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/coarsen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "etpp/error.hpp"

namespace etpp::coarsen {
namespace {

// Band index of offset x when `extent` cells are split into `bands` bands
// starting at ceil(i * extent / bands).
std::size_t band_of(std::size_t x, std::size_t extent, std::size_t bands) {
    std::size_t band = 0;
    for (std::size_t i = 1; i < bands; ++i) {
        const std::size_t start = (i * extent + bands - 1) / bands;
        if (start <= x) band = i;
    }
    return band;
}

std::size_t seat_index(const domain::SeatMap& seat_map, const domain::Transaction& t) {
    const auto idx = seat_map.find(t.row, t.col);
    if (!idx) {
        fail(ErrorKind::kData, "transaction of event '" + t.event_id + "' references unknown seat (" +
                                   std::to_string(t.row) + "," + std::to_string(t.col) + ")");
    }
    return *idx;
}

domain::Standardizer fit_or_center(std::span<const double> values, std::uint64_t fitted_on) {
    const bool constant =
        std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); });
    if (constant) return domain::Standardizer{values.front(), 1.0, fitted_on};
    return domain::fit_standardizer(values, fitted_on);
}

}  // namespace

GridLayout build_grid_layout(const domain::SeatMap& seat_map, std::size_t grid_rows, std::size_t grid_cols) {
    if (grid_rows == 0 || grid_cols == 0) fail(ErrorKind::kInvalidArgument, "grid dimensions must be positive");
    if (seat_map.size() == 0) fail(ErrorKind::kInvalidArgument, "seat map is empty");
    const std::size_t m = grid_rows * grid_cols;
    if (m > seat_map.size()) {
        fail(ErrorKind::kInvalidArgument, "more grids (" + std::to_string(m) + ") than seats (" +
                                              std::to_string(seat_map.size()) + ")");
    }
    const std::size_t row_extent = static_cast<std::size_t>(seat_map.max_row() - seat_map.min_row() + 1);
    const std::size_t col_extent = static_cast<std::size_t>(seat_map.max_col() - seat_map.min_col() + 1);

    GridLayout layout;
    layout.grid_rows = grid_rows;
    layout.grid_cols = grid_cols;
    layout.grid_seats.resize(m);
    layout.seat_to_grid.resize(seat_map.size());
    for (std::size_t s = 0; s < seat_map.size(); ++s) {
        const domain::Seat& seat = seat_map.seat(s);
        const std::size_t br = band_of(static_cast<std::size_t>(seat.row - seat_map.min_row()), row_extent, grid_rows);
        const std::size_t bc = band_of(static_cast<std::size_t>(seat.col - seat_map.min_col()), col_extent, grid_cols);
        const std::size_t g = br * grid_cols + bc;
        layout.seat_to_grid[s] = g;
        layout.grid_seats[g].push_back(s);
    }

    layout.merged_into.resize(m);
    for (std::size_t g = 0; g < m; ++g) {
        if (!layout.grid_seats[g].empty()) {
            layout.merged_into[g] = g;
            continue;
        }
        std::size_t best = m;
        std::size_t best_dist = std::numeric_limits<std::size_t>::max();
        for (std::size_t o = 0; o < m; ++o) {
            if (layout.grid_seats[o].empty()) continue;
            const auto diff = [](std::size_t a, std::size_t b) { return a > b ? a - b : b - a; };
            const std::size_t dist = diff(g / grid_cols, o / grid_cols) + diff(g % grid_cols, o % grid_cols);
            if (dist < best_dist) {
                best = o;
                best_dist = dist;
            }
        }
        layout.merged_into[g] = best;
    }
    return layout;
}

// ---------------------------------------------------------------- binning

double TimeBinning::lower_edge(std::size_t j) const { return static_cast<double>(bins - j) * width(); }

double TimeBinning::upper_edge(std::size_t j) const { return static_cast<double>(bins - j + 1) * width(); }

double TimeBinning::representative_dte(std::size_t j) const {
    if (j < 1 || j > bins) fail(ErrorKind::kInvalidArgument, "bin index " + std::to_string(j) + " out of range");
    return std::exp(0.5 * (lower_edge(j) + upper_edge(j))) - 1.0;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
    if (values.empty()) fail(ErrorKind::kInvalidArgument, "quantile of an empty set");
    if (!(q > 0.0 && q <= 1.0)) fail(ErrorKind::kInvalidArgument, "quantile level must lie in (0, 1]");
    std::sort(values.begin(), values.end());
    const double rank = std::ceil(q * static_cast<double>(values.size()));
    const std::size_t idx = static_cast<std::size_t>(std::max(1.0, rank)) - 1;
    return values[std::min(idx, values.size() - 1)];
}

TimeBinning build_time_binning(std::span<const double> dtes, std::size_t bins, double coverage,
                               std::uint64_t fitted_on) {
    if (dtes.empty()) fail(ErrorKind::kInvalidArgument, "time binning needs at least one transaction");
    if (bins == 0) fail(ErrorKind::kInvalidArgument, "bin count L must be at least 1");
    std::vector<double> logs;
    logs.reserve(dtes.size());
    for (const double d : dtes) {
        if (!(d >= 0.0)) fail(ErrorKind::kInvalidArgument, "dte must be >= 0");
        logs.push_back(std::log(d + 1.0));
    }
    const double upper = nearest_rank_quantile(std::move(logs), coverage);
    if (!(upper > 0.0)) {
        fail(ErrorKind::kData, "degenerate time binning: the " + std::to_string(coverage) +
                                   " quantile of log(dte+1) is 0 (all covered transactions at dte = 0)");
    }
    return TimeBinning{bins, upper, fitted_on};
}

std::size_t assign_bin(double dte, const TimeBinning& binning) {
    const double pos = std::floor(std::log(std::max(dte, 0.0) + 1.0) / binning.width());
    const double j = static_cast<double>(binning.bins) - pos;
    if (j < 1.0) return 1;
    if (j > static_cast<double>(binning.bins)) return binning.bins;
    return static_cast<std::size_t>(j);
}

double median(std::vector<double> values) {
    if (values.empty()) fail(ErrorKind::kInvalidArgument, "median of an empty set");
    const std::size_t n = values.size();
    std::sort(values.begin(), values.end());
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// ---------------------------------------------------------------- coarsening

CoarsenedEvent coarsen_event(std::span<const domain::Transaction> transactions, const domain::SeatMap& seat_map,
                             const GridLayout& layout, const TimeBinning& binning,
                             const domain::Standardizer& price) {
    const std::size_t m = layout.m();
    const std::size_t n = layout.n();
    const std::size_t L = binning.bins;
    if (n != seat_map.size()) fail(ErrorKind::kShape, "layout and seat map disagree on seat count");

    CoarsenedEvent out;
    out.seats.values = Array({n, L});
    out.seats.mask = Array({n, L});
    std::vector<std::vector<double>> cell(m * L);

    const std::string* event_id = nullptr;
    for (const domain::Transaction& t : transactions) {
        if (event_id == nullptr) {
            event_id = &t.event_id;
        } else if (t.event_id != *event_id) {
            fail(ErrorKind::kInvalidArgument, "coarsen_event: transactions span events '" + *event_id + "' and '" +
                                                  t.event_id + "'");
        }
        const std::size_t s = seat_index(seat_map, t);
        const std::size_t j = assign_bin(t.dte, binning) - 1;
        const double z = price.standardize(t.price);
        for (std::size_t k = 0; k < L; ++k) {
            if (out.seats.mask.at(s, k) != 0.0) {
                fail(ErrorKind::kData, "seat (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                                           ") sold more than once in event '" + t.event_id + "'");
            }
        }
        out.seats.values.at(s, j) = z;
        out.seats.mask.at(s, j) = 1.0;
        cell[layout.seat_to_grid[s] * L + j].push_back(z);
    }

    out.coarse.values = Array({m, L});
    out.coarse.mask = Array({m, L});
    for (std::size_t g = 0; g < m; ++g)
        for (std::size_t j = 0; j < L; ++j) {
            std::vector<double>& v = cell[g * L + j];
            if (v.empty()) continue;
            out.coarse.values.at(g, j) = median(std::move(v));
            out.coarse.mask.at(g, j) = 1.0;
        }
    return out;
}

double coarse_seat_coverage(const CoarseTensor& coarse, const GridLayout& layout) {
    const std::size_t L = coarse.mask.dim(1);
    double covered = 0.0;
    for (std::size_t g = 0; g < layout.m(); ++g)
        for (std::size_t j = 0; j < L; ++j)
            if (coarse.mask.at(g, j) == 1.0) covered += static_cast<double>(layout.grid_seats[g].size());
    return covered / static_cast<double>(layout.n() * L);
}

double seat_mask_density(const SeatTensor& seats) {
    double ones = 0.0;
    for (const double v : seats.mask.data()) ones += v;
    return ones / static_cast<double>(seats.mask.size());
}

double coarse_mask_density(const CoarseTensor& coarse) {
    double ones = 0.0;
    for (const double v : coarse.mask.data()) ones += v;
    return ones / static_cast<double>(coarse.mask.size());
}

// ---------------------------------------------------------------- prior / imputation

PriorSurface fit_prior_surface(std::span<const domain::Transaction> transactions, const domain::SeatMap& seat_map,
                               const GridLayout& layout, const TimeBinning& binning, const domain::Standardizer& price,
                               std::uint64_t fitted_on) {
    const std::size_t m = layout.m();
    const std::size_t L = binning.bins;
    std::vector<std::vector<double>> cell(m * L);
    std::vector<std::vector<double>> grid(m);
    for (const domain::Transaction& t : transactions) {
        const std::size_t g = layout.seat_to_grid[seat_index(seat_map, t)];
        const std::size_t j = assign_bin(t.dte, binning) - 1;
        const double z = price.standardize(t.price);
        cell[g * L + j].push_back(z);
        grid[g].push_back(z);
    }
    PriorSurface prior{Array({m, L}), fitted_on};
    for (std::size_t g = 0; g < m; ++g) {
        const std::size_t src = layout.merged_into[g];
        const double grid_median = grid[src].empty() ? 0.0 : median(grid[src]);
        for (std::size_t j = 0; j < L; ++j) {
            const std::vector<double>& v = cell[src * L + j];
            prior.values.at(g, j) = v.empty() ? grid_median : median(v);
        }
    }
    return prior;
}

Array impute_input(const CoarseTensor& coarse, const Array& prior) {
    if (coarse.values.shape() != prior.shape() || coarse.mask.shape() != prior.shape()) {
        fail(ErrorKind::kShape, "impute_input: coarse " + numerics::shape_string(coarse.values.shape()) +
                                    " vs prior " + numerics::shape_string(prior.shape()));
    }
    Array out = prior;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (coarse.mask[i] == 1.0) out[i] = coarse.values[i];
    }
    return out;
}

// ---------------------------------------------------------------- expansion

SeatFeatureScaling fit_seat_feature_scaling(const domain::SeatMap& seat_map, std::span<const double> dtes,
                                            std::uint64_t fitted_on) {
    if (dtes.empty()) fail(ErrorKind::kInvalidArgument, "dte scaling needs at least one value");
    std::vector<double> rows, cols;
    for (const domain::Seat& s : seat_map.seats()) {
        rows.push_back(s.row);
        cols.push_back(s.col);
    }
    return SeatFeatureScaling{fit_or_center(rows, fitted_on), fit_or_center(cols, fitted_on),
                              fit_or_center(dtes, fitted_on)};
}

Array seat_static_features(const domain::SeatMap& seat_map, const SeatFeatureScaling& scaling, double dte) {
    const std::size_t n = seat_map.size();
    Array out({n, 3});
    const double z_dte = scaling.dte.standardize(dte);
    for (std::size_t s = 0; s < n; ++s) {
        out.at(s, 0) = z_dte;
        out.at(s, 1) = scaling.row.standardize(seat_map.seat(s).row);
        out.at(s, 2) = scaling.col.standardize(seat_map.seat(s).col);
    }
    return out;
}

Array expand_to_seats(const Array& grid_prediction, const GridLayout& layout, const domain::SeatMap& seat_map,
                      const SeatFeatureScaling& scaling, double dte) {
    if (grid_prediction.size() != layout.m()) {
        fail(ErrorKind::kShape, "expand_to_seats: prediction length " + std::to_string(grid_prediction.size()) +
                                    " != grid count " + std::to_string(layout.m()));
    }
    const Array rest = seat_static_features(seat_map, scaling, dte);
    Array out({layout.n(), 4});
    for (std::size_t s = 0; s < layout.n(); ++s) {
        out.at(s, 0) = grid_prediction[layout.seat_to_grid[s]];
        for (std::size_t k = 0; k < 3; ++k) out.at(s, k + 1) = rest.at(s, k);
    }
    return out;
}

}  // namespace etpp::coarsen
