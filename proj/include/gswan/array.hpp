#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace gswan {

// Extents of a dense array, rank 0 (scalar) through 4.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<std::int64_t> extents);
    explicit Shape(const std::vector<std::int64_t>& extents);

    int rank() const { return rank_; }
    std::int64_t operator[](int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
    std::int64_t size() const;

    bool operator==(const Shape& other) const;
    bool operator!=(const Shape& other) const { return !(*this == other); }

    std::string str() const;
    std::vector<std::int64_t> extents() const;

private:
    std::array<std::int64_t, 4> dims_{1, 1, 1, 1};
    int rank_ = 0;
};

// Dense row-major array of 64-bit floats. A plain value type: copies are
// deep, moves are cheap, and a const Array is safe to share across threads.
class Array {
public:
    Array() = default;
    explicit Array(Shape shape);  // zero-filled
    Array(Shape shape, std::vector<double> data);
    Array(Shape shape, double fill);

    static Array scalar(double v) { return Array(Shape{}, std::vector<double>{v}); }
    static Array zeros(Shape shape) { return Array(std::move(shape)); }
    static Array full(Shape shape, double v) { return Array(std::move(shape), v); }

    const Shape& shape() const { return shape_; }
    int rank() const { return shape_.rank(); }
    std::int64_t extent(int axis) const { return shape_[axis]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    double& at(std::int64_t i, std::int64_t j) { return data_[static_cast<std::size_t>(i * shape_[1] + j)]; }
    double at(std::int64_t i, std::int64_t j) const { return data_[static_cast<std::size_t>(i * shape_[1] + j)]; }
    double& at(std::int64_t i, std::int64_t j, std::int64_t k) {
        return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }
    double at(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }
    double& at(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) {
        return data_[static_cast<std::size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
    }
    double at(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
        return data_[static_cast<std::size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
    }

    bool same_shape(const Array& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

private:
    Shape shape_;
    std::vector<double> data_;
};

double max_abs_diff(const Array& a, const Array& b);
bool bit_equal(const Array& a, const Array& b);

}  // namespace gswan
