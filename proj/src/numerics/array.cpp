// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#include "etpp/numerics/array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "etpp/error.hpp"

namespace etpp::numerics {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Array::Array(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
        fail(ErrorKind::kShape, "array shape " + shape_string(shape_) + " does not match data length " +
                                    std::to_string(data_.size()));
    }
}

Array Array::vector(std::initializer_list<double> values) { return Array({values.size()}, std::vector<double>(values)); }

Array Array::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Array({n}, std::move(values));
}

Array Array::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Array({rows, cols}, std::vector<double>(values));
}

Array Array::scalar(double value) { return Array({1}, std::vector<double>{value}); }

Array Array::reshaped(Shape shape) const { return Array(std::move(shape), data_); }

void Array::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Array::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace etpp::numerics
