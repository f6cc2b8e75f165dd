// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/model/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "etpp/error.hpp"
#include "etpp/log.hpp"
#include "etpp/numerics/adam.hpp"

namespace etpp::model {
namespace {

constexpr std::uint64_t kCutoffStream = 0x2545f4914f6cdd1dULL;
constexpr std::uint64_t kValidationStream = 0x9e3779b97f4a7c15ULL;

NetVars bind_constants(Tape& t, const ParamSet& params) {
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(t.constant(params.at(i)));
    return resolve_network(params, vars);
}

std::vector<std::size_t> draw_cutoffs(std::mt19937_64& rng, std::size_t count, std::size_t bins) {
    std::vector<std::size_t> out(count);
    for (std::size_t& c : out) c = 1 + static_cast<std::size_t>(rng() % bins);
    return out;
}

}  // namespace

SeatFeatureCache::SeatFeatureCache(const Preprocessing& prep) {
    for (std::size_t j = 1; j <= prep.binning.bins; ++j) per_bin_.push_back(prep.seat_static(j));
}

Array SeatFeatureCache::rows(std::size_t j, std::span<const std::size_t> seats) const {
    const Array& all = per_bin_.at(j);
    const std::size_t w = all.dim(1);
    Array out({seats.size(), w});
    for (std::size_t i = 0; i < seats.size(); ++i)
        for (std::size_t k = 0; k < w; ++k) out.at(i, k) = all.at(seats[i], k);
    return out;
}


Var event_loss(Tape& t, const Network& net, const NetVars& v, const Preprocessing& prep,
               const SeatFeatureCache& seats, const EventExample& example, const Array& input) {
    const std::size_t L = net.config.bins;
    const std::size_t m = net.dims.m();
    const coarsen::SeatTensor& seat_target = example.target.seats;
    const coarsen::CoarseTensor& grid_target = example.target.coarse;

    std::vector<RefineRequest> requests(L);
    std::vector<std::vector<std::size_t>> observed(L);
    if (net.config.beta != 0.0) {
        for (std::size_t s = 0; s < seat_target.mask.dim(0); ++s)
            for (std::size_t j = 0; j < L; ++j)
                if (seat_target.mask.at(s, j) == 1.0) observed[j].push_back(s);
        for (std::size_t j = 0; j < L; ++j) {
            for (const std::size_t s : observed[j]) requests[j].grid_index.push_back(prep.layout.seat_to_grid[s]);
            requests[j].static_rows = seats.rows(j, observed[j]);
        }
    }
    const ForwardResult fwd = forward_event(t, net, v, input, example.features, requests);

    std::vector<MaskedTarget> grid_terms, seat_terms;
    for (std::size_t j = 0; j < L; ++j) {
        MaskedTarget g{fwd.g_hat[j], Array({m}), Array({m})};
        for (std::size_t i = 0; i < m; ++i) {
            g.target[i] = grid_target.values.at(i, j);
            g.mask[i] = grid_target.mask.at(i, j);
        }
        grid_terms.push_back(std::move(g));
        if (!fwd.p_hat[j].valid()) continue;
        const std::size_t r = observed[j].size();
        MaskedTarget p{fwd.p_hat[j], Array({r, 1}), Array({r, 1}, 1.0)};
        for (std::size_t i = 0; i < r; ++i) p.target[i] = seat_target.values.at(observed[j][i], j);
        seat_terms.push_back(std::move(p));
    }
    return bilevel_loss(t, grid_terms, seat_terms, net.config.alpha, net.config.beta);
}

double mean_loss(const Network& net, const ParamSet& params, const Preprocessing& prep,
                 std::span<const EventExample> examples, std::span<const std::size_t> cutoffs) {
    if (examples.empty()) return 0.0;
    const SeatFeatureCache cache(prep);
    double total = 0.0;
    for (std::size_t e = 0; e < examples.size(); ++e) {
        Tape t;
        const NetVars v = bind_constants(t, params);
        const Array input = model_input(prep, examples[e].target.coarse, cutoffs[e]);
        total += t.value(event_loss(t, net, v, prep, cache, examples[e], input))[0];
    }
    return total / static_cast<double>(examples.size());
}

Model train(const ModelConfig& config, Preprocessing prep, std::span<const EventExample> train_set,
            std::span<const EventExample> val_set) {
    validate(config);
    if (train_set.empty()) fail(ErrorKind::kInvalidArgument, "training split is empty");
    if (val_set.empty()) fail(ErrorKind::kInvalidArgument, "validation split is empty");
    if (prep.binning.bins != config.bins) fail(ErrorKind::kInvalidArgument, "preprocessing bin count differs from config");

    Model model{config, std::move(prep), {}, {}};
    const Network net = model.network();
    const Preprocessing& pp = model.prep;
    const std::size_t L = config.bins;
    model.params = init_params(config, net.dims, config.seed);
    numerics::AdamState adam = numerics::AdamState::zeros_like(model.params, {config.learning_rate});
    const SeatFeatureCache cache(pp);

    std::mt19937_64 cutoff_rng(config.seed ^ kCutoffStream);
    std::mt19937_64 val_rng(config.seed ^ kValidationStream);
    const std::vector<std::size_t> val_cutoffs = config.cutoff_augmentation
                                                     ? draw_cutoffs(val_rng, val_set.size(), L)
                                                     : std::vector<std::size_t>(val_set.size(), L + 1);

    const std::size_t batch = config.batch_size == 0 ? train_set.size() : std::min(config.batch_size, train_set.size());
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    TrainSummary& summary = model.summary;
    summary.best_val_loss = std::numeric_limits<double>::infinity();
    ParamSet best = model.params;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const std::vector<std::size_t> cutoffs = config.cutoff_augmentation
                                                     ? draw_cutoffs(cutoff_rng, train_set.size(), L)
                                                     : std::vector<std::size_t>(train_set.size(), L + 1);
        if (config.batch_size != 0) std::shuffle(order.begin(), order.end(), cutoff_rng);

        double epoch_loss = 0.0;
        try {
            for (std::size_t start = 0; start < order.size(); start += batch) {
                const std::size_t end = std::min(order.size(), start + batch);
                std::vector<Array> grads;
                for (std::size_t i = start; i < end; ++i) {
                    const std::size_t e = order[i];
                    Tape t;
                    const numerics::BoundParams bound = numerics::bind(t, model.params);
                    const NetVars v = resolve_network(model.params, bound.vars);
                    const Array input = model_input(pp, train_set[e].target.coarse, cutoffs[e]);
                    const Var loss = event_loss(t, net, v, pp, cache, train_set[e], input);
                    const double value = t.value(loss)[0];
                    if (!std::isfinite(value)) {
                        fail(ErrorKind::kNumeric, "non-finite training loss on event '" + train_set[e].event_id + "'");
                    }
                    epoch_loss += value;
                    t.backward(loss);
                    std::vector<Array> g = numerics::collect_grads(t, bound);
                    if (grads.empty()) {
                        grads = std::move(g);
                    } else {
                        for (std::size_t p = 0; p < grads.size(); ++p)
                            for (std::size_t k = 0; k < grads[p].size(); ++k) grads[p][k] += g[p][k];
                    }
                }
                const double inv = 1.0 / static_cast<double>(end - start);
                for (Array& g : grads)
                    for (double& x : g.data()) x *= inv;
                numerics::adam_step(model.params, grads, adam);
            }
        } catch (const Error& err) {
            if (err.kind() != ErrorKind::kNumeric) throw;
            summary.halted = true;
            summary.halt_reason = "epoch " + std::to_string(epoch) + ": " + err.what();
            log::warn("training halted: " + summary.halt_reason);
            break;
        }

        const double val_loss = mean_loss(net, model.params, pp, val_set, val_cutoffs);
        const double train_loss = epoch_loss / static_cast<double>(train_set.size());
        summary.history.push_back({epoch, train_loss, val_loss});
        if (!std::isfinite(val_loss)) {
            summary.halted = true;
            summary.halt_reason = "epoch " + std::to_string(epoch) + ": non-finite validation loss";
            log::warn("training halted: " + summary.halt_reason);
            break;
        }
        if (val_loss < summary.best_val_loss) {
            summary.best_val_loss = val_loss;
            summary.best_epoch = epoch;
            best = model.params;
        }
        if (epoch % 10 == 0) {
            log::info("epoch " + std::to_string(epoch) + " train " + std::to_string(train_loss) + " val " +
                      std::to_string(val_loss));
        }
        if (config.patience != 0 && epoch - summary.best_epoch >= config.patience) {
            summary.stopped_early = true;
            break;
        }
    }
    if (summary.history.empty() && summary.halted) {
        summary.best_val_loss = std::numeric_limits<double>::quiet_NaN();
    }
    model.params = std::move(best);
    return model;
}

Model fit_model(const domain::Dataset& dataset, std::span<const std::string> train_ids,
                std::span<const std::string> val_ids, const ModelConfig& config) {
    Preprocessing prep = fit_preprocessing(dataset, train_ids, config);
    const auto build = [&](std::span<const std::string> ids) {
        std::vector<EventExample> out;
        const auto groups = transactions_by_event(dataset, ids);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const domain::EventRecord* rec = dataset.events.find(ids[i]);
            if (rec == nullptr) fail(ErrorKind::kData, "unknown event '" + ids[i] + "'");
            out.push_back(make_example(prep, *rec, groups[i]));
        }
        return out;
    };
    const std::vector<EventExample> train_set = build(train_ids);
    const std::vector<EventExample> val_set = build(val_ids);
    return train(config, std::move(prep), train_set, val_set);
}

std::vector<double> predict(const Model& model, const domain::EventRecord& event,
                            std::span<const domain::Transaction> partial, std::span<const SeatQuery> queries) {
    const Preprocessing& pp = model.prep;
    const std::size_t L = model.config.bins;
    std::vector<domain::Transaction> observed(partial.begin(), partial.end());
    for (domain::Transaction& t : observed) t.event_id = event.event_id;
    const coarsen::CoarsenedEvent ce = coarsen::coarsen_event(observed, pp.seat_map, pp.layout, pp.binning, pp.price);
    const Array input = model_input(pp, ce.coarse, L + 1);

    // Group queries by bin so each bin refines only the seats asked for.
    std::vector<std::vector<std::size_t>> seats(L), slots(L);
    for (std::size_t q = 0; q < queries.size(); ++q) {
        const auto idx = pp.seat_map.find(queries[q].row, queries[q].col);
        if (!idx) {
            fail(ErrorKind::kData, "query seat (" + std::to_string(queries[q].row) + "," +
                                       std::to_string(queries[q].col) + ") is not in the seat map");
        }
        if (!(queries[q].dte >= 0.0)) fail(ErrorKind::kInvalidArgument, "query dte must be >= 0");
        const std::size_t j = coarsen::assign_bin(queries[q].dte, pp.binning) - 1;
        seats[j].push_back(*idx);
        slots[j].push_back(q);
    }
    const SeatFeatureCache cache(pp);
    std::vector<RefineRequest> requests(L);
    for (std::size_t j = 0; j < L; ++j) {
        for (const std::size_t s : seats[j]) requests[j].grid_index.push_back(pp.layout.seat_to_grid[s]);
        requests[j].static_rows = cache.rows(j, seats[j]);
    }

    Tape t;
    const Network net = model.network();
    const NetVars v = bind_constants(t, model.params);
    const ForwardResult fwd = forward_event(t, net, v, input, pp.features(event), requests);
    std::vector<double> out(queries.size());
    for (std::size_t j = 0; j < L; ++j) {
        if (slots[j].empty()) continue;
        const Array& p = t.value(fwd.p_hat[j]);
        for (std::size_t i = 0; i < slots[j].size(); ++i) out[slots[j][i]] = pp.price.destandardize(p[i]);
    }
    return out;
}

}  // namespace etpp::model
