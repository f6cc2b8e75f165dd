// Copyright 2026 The ETPP Authors. Apache 2.0 License.
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace etpp::numerics {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. The product of the shape always equals
/// the data length.
class Array {
   public:
    Array() = default;
    explicit Array(Shape shape, double fill = 0.0);
    Array(Shape shape, std::vector<double> data);

    static Array vector(std::initializer_list<double> values);
    static Array vector(std::vector<double> values);
    static Array matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);
    static Array scalar(double value);

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    /// Same data, new shape of equal total size.
    [[nodiscard]] Array reshaped(Shape shape) const;
    void fill(double value);
    [[nodiscard]] bool all_finite() const;

    friend bool operator==(const Array&, const Array&) = default;

   private:
    Shape shape_;
    std::vector<double> data_;
};

}  // namespace etpp::numerics
