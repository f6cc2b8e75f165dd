// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/model/pipeline.hpp"

#include <unordered_map>

#include "etpp/error.hpp"

namespace etpp::model {

NetworkDims Preprocessing::dims() const {
    return NetworkDims{layout.grid_rows, layout.grid_cols, encoder.width()};
}

Array Preprocessing::features(const domain::EventRecord& event) const {
    const domain::EventInfo info = encoder.transform(event);
    return Array::vector(feature_scaler.apply(info.features));
}

Array Preprocessing::seat_static(std::size_t j) const {
    return coarsen::seat_static_features(seat_map, seat_scaling, binning.representative_dte(j));
}

std::vector<std::vector<domain::Transaction>> transactions_by_event(const domain::Dataset& dataset,
                                                                    std::span<const std::string> event_ids) {
    std::unordered_map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < event_ids.size(); ++i) slot.emplace(event_ids[i], i);
    std::vector<std::vector<domain::Transaction>> out(event_ids.size());
    for (const domain::Transaction& t : dataset.transactions) {
        const auto it = slot.find(t.event_id);
        if (it != slot.end()) out[it->second].push_back(t);
    }
    return out;
}

Preprocessing fit_preprocessing(const domain::Dataset& dataset, std::span<const std::string> train_ids,
                                const ModelConfig& config) {
    validate(config);
    if (train_ids.empty()) fail(ErrorKind::kInvalidArgument, "no training events");
    const std::uint64_t fp = domain::fingerprint_events({train_ids.begin(), train_ids.end()});

    std::vector<domain::Transaction> train_tx;
    for (auto& group : transactions_by_event(dataset, train_ids)) {
        train_tx.insert(train_tx.end(), group.begin(), group.end());
    }
    if (train_tx.empty()) fail(ErrorKind::kData, "training events have no transactions");
    std::vector<double> prices, dtes;
    for (const domain::Transaction& t : train_tx) {
        prices.push_back(t.price);
        dtes.push_back(t.dte);
    }

    Preprocessing prep;
    prep.fitted_on = fp;
    prep.seat_map = dataset.seat_map;
    prep.layout = coarsen::build_grid_layout(dataset.seat_map, config.grid_rows, config.grid_cols);
    prep.binning = coarsen::build_time_binning(dtes, config.bins, config.coverage, fp);
    prep.price = domain::fit_standardizer(prices, fp);
    prep.encoder = domain::FeatureEncoder::fit(dataset.events, train_ids);
    std::vector<domain::EventInfo> infos;
    for (const std::string& id : train_ids) {
        const domain::EventRecord* rec = dataset.events.find(id);
        if (rec == nullptr) fail(ErrorKind::kData, "unknown training event '" + id + "'");
        infos.push_back(prep.encoder.transform(*rec));
    }
    prep.feature_scaler = domain::FeatureScaler::fit(infos, fp);
    prep.seat_scaling = coarsen::fit_seat_feature_scaling(dataset.seat_map, dtes, fp);
    prep.prior = coarsen::fit_prior_surface(train_tx, dataset.seat_map, prep.layout, prep.binning, prep.price, fp);
    return prep;
}

EventExample make_example(const Preprocessing& prep, const domain::EventRecord& event,
                          std::span<const domain::Transaction> transactions) {
    return EventExample{event.event_id, prep.features(event),
                        coarsen::coarsen_event(transactions, prep.seat_map, prep.layout, prep.binning, prep.price)};
}

Array model_input(const Preprocessing& prep, const coarsen::CoarseTensor& observed, std::size_t cutoff) {
    coarsen::CoarseTensor visible = observed;
    const std::size_t L = visible.mask.dim(1);
    for (std::size_t g = 0; g < visible.mask.dim(0); ++g)
        for (std::size_t j = 0; j < L; ++j)
            if (j + 1 >= cutoff) visible.mask.at(g, j) = 0.0;
    return coarsen::impute_input(visible, prep.prior.values);
}

}  // namespace etpp::model
