// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "etpp/coarsen.hpp"
#include "etpp/domain.hpp"
#include "etpp/model/config.hpp"
#include "etpp/model/network.hpp"

namespace etpp::model {

/// Everything fitted on the training events before the network sees data.
/// Every component records the training fingerprint it was fitted on.
struct Preprocessing {
    domain::SeatMap seat_map;
    coarsen::GridLayout layout;
    coarsen::TimeBinning binning;
    domain::Standardizer price;
    domain::FeatureEncoder encoder;
    domain::FeatureScaler feature_scaler;
    coarsen::SeatFeatureScaling seat_scaling;
    coarsen::PriorSurface prior;
    std::uint64_t fitted_on = 0;

    [[nodiscard]] NetworkDims dims() const;
    /// Scaled event features [q].
    [[nodiscard]] Array features(const domain::EventRecord& event) const;
    /// [n x 3] standardized (dte, row, col) at the representative dte of bin j (1-based).
    [[nodiscard]] Array seat_static(std::size_t j) const;
};

/// Fits layout, binning, price and feature scaling, and the prior surface on
/// the given training events only.
Preprocessing fit_preprocessing(const domain::Dataset& dataset, std::span<const std::string> train_ids,
                                const ModelConfig& config);

/// One event ready for training: scaled features and coarse/seat targets.
struct EventExample {
    std::string event_id;
    Array features;
    coarsen::CoarsenedEvent target;
};

EventExample make_example(const Preprocessing& prep, const domain::EventRecord& event,
                          std::span<const domain::Transaction> transactions);

/// Network input [m x L]: observed medians in bins before `cutoff` (1-based),
/// prior surface from `cutoff` on. cutoff = L + 1 keeps every observed bin.
Array model_input(const Preprocessing& prep, const coarsen::CoarseTensor& observed, std::size_t cutoff);

/// Transactions of `event_ids`, grouped per event in the given order.
std::vector<std::vector<domain::Transaction>> transactions_by_event(const domain::Dataset& dataset,
                                                                    std::span<const std::string> event_ids);

}  // namespace etpp::model
