// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "etpp/model/config.hpp"
#include "etpp/model/network.hpp"
#include "etpp/model/pipeline.hpp"

namespace etpp::model {

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;  ///< mean per-event loss over the epoch's updates
    double val_loss = 0.0;    ///< mean per-event loss after the epoch

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainSummary {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    bool stopped_early = false;
    /// Set when a non-finite loss or gradient stopped training; the retained
    /// parameters are the last good best-validation ones.
    bool halted = false;
    std::string halt_reason;

    friend bool operator==(const TrainSummary&, const TrainSummary&) = default;
};

/// A trained network with everything needed to predict from raw records.
struct Model {
    ModelConfig config;
    Preprocessing prep;
    ParamSet params;
    TrainSummary summary;

    [[nodiscard]] Network network() const { return Network{config, prep.dims()}; }
};

/// Per-bin standardized seat features, computed once per preprocessing.
class SeatFeatureCache {
   public:
    explicit SeatFeatureCache(const Preprocessing& prep);
    /// Rows of bin j (0-based) for the given seats, [r x 3].
    [[nodiscard]] Array rows(std::size_t j, std::span<const std::size_t> seats) const;

   private:
    std::vector<Array> per_bin_;
};

/// Bi-level loss of one event with its targets, for the given network input.
Var event_loss(Tape& t, const Network& net, const NetVars& v, const Preprocessing& prep,
               const SeatFeatureCache& seats, const EventExample& example, const Array& input);

/// Mean per-event loss with every event's input cut at the given bin.
double mean_loss(const Network& net, const ParamSet& params, const Preprocessing& prep,
                 std::span<const EventExample> examples, std::span<const std::size_t> cutoffs);

/// Full-batch (or minibatch) Adam with early stopping on validation loss.
/// Keeps the best-validation parameters.
Model train(const ModelConfig& config, Preprocessing prep, std::span<const EventExample> train_set,
            std::span<const EventExample> val_set);

/// Fits preprocessing on train_ids, builds examples, and trains.
Model fit_model(const domain::Dataset& dataset, std::span<const std::string> train_ids,
                std::span<const std::string> val_ids, const ModelConfig& config);

struct SeatQuery {
    int row = 0;
    int col = 0;
    double dte = 0.0;
};

/// Raw-price predictions for one event. Observed medians of `partial` feed
/// their bins; every other bin is fed the prior surface. Each query reads the
/// refined price of its seat at assign_bin(dte).
std::vector<double> predict(const Model& model, const domain::EventRecord& event,
                            std::span<const domain::Transaction> partial, std::span<const SeatQuery> queries);

}  // namespace etpp::model
