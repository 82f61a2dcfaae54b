#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "affect_forge/error.hpp"

namespace affect_forge {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Shape& shape) {
    std::ostringstream os;
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    return shape.empty() ? "scalar" : os.str();
}

/// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)), data_(element_count(shape_), fill) {
        check_dims();
    }

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_dims();
        if (element_count(shape_) != data_.size())
            throw ShapeError("tensor shape " + to_string(shape_) + " needs " + std::to_string(element_count(shape_)) +
                             " values, got " + std::to_string(data_.size()));
    }

    static Tensor vector(std::initializer_list<double> values) {
        return Tensor({values.size()}, std::vector<double>(values));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    /// Same data viewed under a new shape with the same element count.
    Tensor reshaped(Shape shape) const& {
        Tensor out = *this;
        return std::move(out).reshaped(std::move(shape));
    }
    Tensor reshaped(Shape shape) && {
        if (element_count(shape) != data_.size())
            throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
        shape_ = std::move(shape);
        return std::move(*this);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor& operator+=(const Tensor& other) {
        if (other.shape_ != shape_)
            throw ShapeError("cannot add " + to_string(other.shape_) + " into " + to_string(shape_));
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    Tensor& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    void check_dims() const {
        for (std::size_t d : shape_)
            if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape_));
    }

    Shape shape_;
    std::vector<double> data_;
};

} // namespace affect_forge
