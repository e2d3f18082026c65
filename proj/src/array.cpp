#include "gswan/array.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace gswan {

Shape::Shape(std::initializer_list<std::int64_t> extents) {
    if (extents.size() > 4) throw std::invalid_argument("Shape: rank > 4 not supported");
    rank_ = static_cast<int>(extents.size());
    int i = 0;
    for (std::int64_t e : extents) {
        if (e < 0) throw std::invalid_argument("Shape: negative extent");
        dims_[static_cast<std::size_t>(i++)] = e;
    }
}

Shape::Shape(const std::vector<std::int64_t>& extents) {
    if (extents.size() > 4) throw std::invalid_argument("Shape: rank > 4 not supported");
    rank_ = static_cast<int>(extents.size());
    for (int i = 0; i < rank_; ++i) {
        if (extents[static_cast<std::size_t>(i)] < 0) throw std::invalid_argument("Shape: negative extent");
        dims_[static_cast<std::size_t>(i)] = extents[static_cast<std::size_t>(i)];
    }
}

std::int64_t Shape::size() const {
    std::int64_t n = 1;
    for (int i = 0; i < rank_; ++i) n *= dims_[static_cast<std::size_t>(i)];
    return n;
}

bool Shape::operator==(const Shape& other) const {
    if (rank_ != other.rank_) return false;
    for (int i = 0; i < rank_; ++i) {
        if (dims_[static_cast<std::size_t>(i)] != other.dims_[static_cast<std::size_t>(i)]) return false;
    }
    return true;
}

std::string Shape::str() const {
    std::ostringstream os;
    os << '[';
    for (int i = 0; i < rank_; ++i) {
        if (i) os << ',';
        os << dims_[static_cast<std::size_t>(i)];
    }
    os << ']';
    return os.str();
}

std::vector<std::int64_t> Shape::extents() const {
    return std::vector<std::int64_t>(dims_.begin(), dims_.begin() + rank_);
}

Array::Array(Shape shape) : shape_(shape), data_(static_cast<std::size_t>(shape.size()), 0.0) {}

Array::Array(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != shape_.size()) {
        throw std::invalid_argument("Array: data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_.str());
    }
}

Array::Array(Shape shape, double fill) : shape_(shape), data_(static_cast<std::size_t>(shape.size()), fill) {}

bool Array::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double max_abs_diff(const Array& a, const Array& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    double m = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

bool bit_equal(const Array& a, const Array& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace gswan
