// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "etpp/domain.hpp"

namespace etpp::baselines {

/// Median of the target event's observed sales, else the training median.
class GameMedian {
   public:
    GameMedian() = default;
    explicit GameMedian(std::span<const domain::Transaction> train);

    [[nodiscard]] double predict(std::span<const domain::Transaction> observed) const;
    [[nodiscard]] double fallback() const noexcept { return global_; }

   private:
    double global_ = 0.0;
};

/// Per-section median of the target event's observed sales, else the
/// section's training median, else the training median.
class SectionMedian {
   public:
    SectionMedian() = default;
    SectionMedian(std::span<const domain::Transaction> train, const domain::SeatMap& seat_map);

    /// One prediction per section label of the seat map.
    [[nodiscard]] std::map<std::string, double> predict(std::span<const domain::Transaction> observed) const;
    [[nodiscard]] double predict_seat(const std::map<std::string, double>& by_section, int row, int col) const;

   private:
    domain::SeatMap seat_map_;
    std::map<std::string, double> train_;
    double global_ = 0.0;
};

/// Ordinary least squares via the normal equations, with an intercept.
/// Columns are centred and scaled to unit RMS before solving. When the
/// scaled X^T X is singular a ridge of lambda = 1e-8 is added to its diagonal.
struct LinearFit {
    std::vector<double> coefficients;  ///< one per feature column
    double intercept = 0.0;
    bool ridge = false;

    [[nodiscard]] double predict(std::span<const double> x) const;
};

/// rows: one feature vector per observation, all the same width.
LinearFit linear_fit(const std::vector<std::vector<double>>& rows, std::span<const double> y,
                     bool allow_ridge = true);

/// Linear baseline over [dte, row, col, encoded event features].
class LinearModel {
   public:
    LinearModel() = default;
    /// Fits the encoder on `train_ids` and regresses raw price on the features.
    LinearModel(const domain::Dataset& dataset, std::span<const std::string> train_ids);

    [[nodiscard]] double predict(const domain::EventRecord& event, int row, int col, double dte) const;
    [[nodiscard]] const LinearFit& fit() const noexcept { return fit_; }

   private:
    domain::FeatureEncoder encoder_;
    LinearFit fit_;
};

}  // namespace etpp::baselines
