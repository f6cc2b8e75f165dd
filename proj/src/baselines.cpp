// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/baselines.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "etpp/coarsen.hpp"
#include "etpp/error.hpp"

namespace etpp::baselines {
namespace {

constexpr double kRidge = 1e-8;

std::vector<double> prices_of(std::span<const domain::Transaction> tx) {
    std::vector<double> out;
    out.reserve(tx.size());
    for (const domain::Transaction& t : tx) out.push_back(t.price);
    return out;
}

}  // namespace

GameMedian::GameMedian(std::span<const domain::Transaction> train) {
    if (train.empty()) fail(ErrorKind::kInvalidArgument, "GameMedian needs training transactions");
    global_ = coarsen::median(prices_of(train));
}

double GameMedian::predict(std::span<const domain::Transaction> observed) const {
    return observed.empty() ? global_ : coarsen::median(prices_of(observed));
}

SectionMedian::SectionMedian(std::span<const domain::Transaction> train, const domain::SeatMap& seat_map)
    : seat_map_(seat_map) {
    if (train.empty()) fail(ErrorKind::kInvalidArgument, "SectionMedian needs training transactions");
    global_ = coarsen::median(prices_of(train));
    std::map<std::string, std::vector<double>> groups;
    for (const domain::Transaction& t : train) {
        const auto idx = seat_map.find(t.row, t.col);
        if (idx) groups[seat_map.seat(*idx).section].push_back(t.price);
    }
    for (auto& [section, v] : groups) train_[section] = coarsen::median(std::move(v));
}

std::map<std::string, double> SectionMedian::predict(std::span<const domain::Transaction> observed) const {
    std::map<std::string, std::vector<double>> groups;
    for (const domain::Transaction& t : observed) {
        const auto idx = seat_map_.find(t.row, t.col);
        if (idx) groups[seat_map_.seat(*idx).section].push_back(t.price);
    }
    std::map<std::string, double> out;
    for (const std::string& section : seat_map_.sections()) {
        const auto g = groups.find(section);
        if (g != groups.end()) {
            out[section] = coarsen::median(g->second);
        } else {
            const auto tr = train_.find(section);
            out[section] = tr != train_.end() ? tr->second : global_;
        }
    }
    return out;
}

double SectionMedian::predict_seat(const std::map<std::string, double>& by_section, int row, int col) const {
    const auto idx = seat_map_.find(row, col);
    if (!idx) {
        fail(ErrorKind::kData, "seat (" + std::to_string(row) + "," + std::to_string(col) + ") is not in the seat map");
    }
    const auto it = by_section.find(seat_map_.seat(*idx).section);
    return it != by_section.end() ? it->second : global_;
}

double LinearFit::predict(std::span<const double> x) const {
    if (x.size() != coefficients.size()) fail(ErrorKind::kShape, "linear predict: feature width mismatch");
    double y = intercept;
    for (std::size_t i = 0; i < x.size(); ++i) y += coefficients[i] * x[i];
    return y;
}

LinearFit linear_fit(const std::vector<std::vector<double>>& rows, std::span<const double> y, bool allow_ridge) {
    if (rows.empty() || rows.size() != y.size()) fail(ErrorKind::kInvalidArgument, "linear_fit: need matching non-empty rows and targets");
    const std::size_t p = rows.front().size();
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto cols = static_cast<Eigen::Index>(p);
    Eigen::MatrixXd X(n, cols);
    Eigen::VectorXd Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        if (r.size() != p) fail(ErrorKind::kShape, "linear_fit: ragged feature rows");
        for (Eigen::Index k = 0; k < cols; ++k) X(i, k) = r[static_cast<std::size_t>(k)];
        Y(i) = y[static_cast<std::size_t>(i)];
    }
    // Solve on centred, unit-scaled columns; the intercept absorbs the means.
    const Eigen::RowVectorXd mean = X.colwise().mean();
    X.rowwise() -= mean;
    Eigen::RowVectorXd scale = X.colwise().norm() / std::sqrt(static_cast<double>(n));
    for (Eigen::Index k = 0; k < cols; ++k)
        if (scale(k) == 0.0) scale(k) = 1.0;
    X = X.array().rowwise() / scale.array();
    const double y_mean = Y.mean();
    Y.array() -= y_mean;

    LinearFit fit;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(cols);
    if (cols > 0) {
        Eigen::MatrixXd xtx = X.transpose() * X;
        const Eigen::VectorXd xty = X.transpose() * Y;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(xtx);
        lu.setThreshold(1e-12);
        if (!lu.isInvertible()) {
            if (!allow_ridge) fail(ErrorKind::kNumeric, "linear_fit: design matrix is rank deficient");
            xtx.diagonal().array() += kRidge;
            fit.ridge = true;
        }
        beta = xtx.ldlt().solve(xty);
    }
    if (!beta.allFinite()) fail(ErrorKind::kNumeric, "linear_fit: non-finite coefficients");
    fit.intercept = y_mean;
    for (Eigen::Index k = 0; k < cols; ++k) {
        const double c = beta(k) / scale(k);
        fit.coefficients.push_back(c);
        fit.intercept -= c * mean(k);
    }
    return fit;
}

LinearModel::LinearModel(const domain::Dataset& dataset, std::span<const std::string> train_ids)
    : encoder_(domain::FeatureEncoder::fit(dataset.events, train_ids)) {
    std::map<std::string, std::vector<double>, std::less<>> features;
    for (const std::string& id : train_ids) {
        const domain::EventRecord* rec = dataset.events.find(id);
        if (rec == nullptr) fail(ErrorKind::kData, "unknown event '" + id + "'");
        features[id] = encoder_.transform(*rec).features;
    }
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (const domain::Transaction& t : dataset.transactions) {
        const auto it = features.find(t.event_id);
        if (it == features.end()) continue;
        std::vector<double> row = {t.dte, static_cast<double>(t.row), static_cast<double>(t.col)};
        row.insert(row.end(), it->second.begin(), it->second.end());
        rows.push_back(std::move(row));
        y.push_back(t.price);
    }
    if (rows.empty()) fail(ErrorKind::kData, "linear baseline: training events have no transactions");
    fit_ = linear_fit(rows, y);
}

double LinearModel::predict(const domain::EventRecord& event, int row, int col, double dte) const {
    const std::vector<double> f = encoder_.transform(event).features;
    std::vector<double> x = {dte, static_cast<double>(row), static_cast<double>(col)};
    x.insert(x.end(), f.begin(), f.end());
    return fit_.predict(x);
}

}  // namespace etpp::baselines
