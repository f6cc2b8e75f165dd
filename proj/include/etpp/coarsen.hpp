// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "etpp/domain.hpp"
#include "etpp/numerics/array.hpp"

namespace etpp::coarsen {

using numerics::Array;

/// Seat -> grid partition over a grid_rows x grid_cols tiling of the seat
/// extent. Tile t sits at (t / grid_cols, t % grid_cols). Seats are assigned
/// by splitting the row and column extents into bands whose sizes differ by at
/// most one (larger bands first).
///
/// A tile that receives no seats is merged into its nearest non-empty tile
/// (Manhattan distance in tile coordinates, lowest index on ties): it keeps
/// its cell in the spatial map but owns no seats, borrows the neighbour's
/// prior, and is never a loss target.
struct GridLayout {
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;
    std::vector<std::size_t> seat_to_grid;
    std::vector<std::vector<std::size_t>> grid_seats;
    std::vector<std::size_t> merged_into;

    [[nodiscard]] std::size_t m() const noexcept { return grid_rows * grid_cols; }
    [[nodiscard]] std::size_t n() const noexcept { return seat_to_grid.size(); }
    [[nodiscard]] bool is_empty_tile(std::size_t grid) const { return grid_seats.at(grid).empty(); }
};

GridLayout build_grid_layout(const domain::SeatMap& seat_map, std::size_t grid_rows, std::size_t grid_cols);

/// L equal-width bins over [0, upper] in log(dte + 1). Bin j = 1 holds the
/// largest dte (earliest in calendar time), bin j = L holds dte near 0.
struct TimeBinning {
    std::size_t bins = 0;
    double upper = 0.0;  ///< B, in log(dte + 1) units
    std::uint64_t fitted_on = 0;

    [[nodiscard]] double width() const noexcept { return upper / static_cast<double>(bins); }
    /// Lower and upper edges of bin j (1-based) in log(dte + 1) units.
    [[nodiscard]] double lower_edge(std::size_t j) const;
    [[nodiscard]] double upper_edge(std::size_t j) const;
    /// exp(bin centre) - 1.
    [[nodiscard]] double representative_dte(std::size_t j) const;

    friend bool operator==(const TimeBinning&, const TimeBinning&) = default;
};

/// Nearest-rank quantile: the ceil(q * N)-th smallest value (1-based), q in (0, 1].
double nearest_rank_quantile(std::vector<double> values, double q);

/// upper = coverage-quantile of log(dte + 1) over the given dtes. Rejects an
/// empty input, bins == 0, and a degenerate upper bound of 0.
TimeBinning build_time_binning(std::span<const double> dtes, std::size_t bins, double coverage = 0.95,
                               std::uint64_t fitted_on = 0);

/// j = L - floor(log(dte + 1) / width), clamped to [1, L].
std::size_t assign_bin(double dte, const TimeBinning& binning);

/// Median with the even-count convention (mean of the two middle values).
double median(std::vector<double> values);

/// Masked grid-bin medians [m x L] of standardized prices.
struct CoarseTensor {
    Array values;
    Array mask;
};

/// Masked seat-bin prices [n x L]; at most one observation per seat.
struct SeatTensor {
    Array values;
    Array mask;
};

struct CoarsenedEvent {
    CoarseTensor coarse;
    SeatTensor seats;
};

CoarsenedEvent coarsen_event(std::span<const domain::Transaction> transactions, const domain::SeatMap& seat_map,
                             const GridLayout& layout, const TimeBinning& binning,
                             const domain::Standardizer& price);

/// Fraction of seat-bin cells whose grid-bin is observed. Every observed seat
/// cell lies in an observed grid cell, so this is never below seat_mask_density.
double coarse_seat_coverage(const CoarseTensor& coarse, const GridLayout& layout);
double seat_mask_density(const SeatTensor& seats);
/// Unweighted fraction of observed grid-bin cells.
double coarse_mask_density(const CoarseTensor& coarse);

/// Per-(grid, bin) median of standardized prices pooled over the fitting
/// events, falling back to the grid's all-bin median, then to 0.
struct PriorSurface {
    Array values;  ///< [m x L]
    std::uint64_t fitted_on = 0;
};

PriorSurface fit_prior_surface(std::span<const domain::Transaction> transactions, const domain::SeatMap& seat_map,
                               const GridLayout& layout, const TimeBinning& binning, const domain::Standardizer& price,
                               std::uint64_t fitted_on = 0);

/// Observed values where mask is 1, prior elsewhere.
Array impute_input(const CoarseTensor& coarse, const Array& prior);

/// Standardizers for the refine-stage seat features.
struct SeatFeatureScaling {
    domain::Standardizer row;
    domain::Standardizer col;
    domain::Standardizer dte;

    friend bool operator==(const SeatFeatureScaling&, const SeatFeatureScaling&) = default;
};

/// Row/col scaling from the seat map; dte scaling from the given dtes. A
/// constant coordinate (single row or column) is centred with unit scale.
SeatFeatureScaling fit_seat_feature_scaling(const domain::SeatMap& seat_map, std::span<const double> dtes,
                                            std::uint64_t fitted_on = 0);

/// [n x 3] columns: standardized representative dte, seat row, seat col.
Array seat_static_features(const domain::SeatMap& seat_map, const SeatFeatureScaling& scaling, double dte);

/// [n x 4]: duplicated grid price, then the seat_static_features columns.
Array expand_to_seats(const Array& grid_prediction, const GridLayout& layout, const domain::SeatMap& seat_map,
                      const SeatFeatureScaling& scaling, double dte);

}  // namespace etpp::coarsen
