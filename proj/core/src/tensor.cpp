#include "dsmap/tensor.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace dsmap {

namespace {
int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw ShapeError("negative dimension in shape " + shape_to_string(shape));
        n *= d;
    }
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)), numel_(shape_numel(shape_)) {
    data_.assign(static_cast<size_t>(numel_), 0.0);
}

Tensor::Tensor(std::vector<int64_t> shape, double fill)
    : shape_(std::move(shape)), numel_(shape_numel(shape_)) {
    data_.assign(static_cast<size_t>(numel_), fill);
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)), numel_(shape_numel(shape_)) {
    if (numel_ != static_cast<int64_t>(data_.size()))
        throw ShapeError("value count " + std::to_string(data_.size()) +
                         " does not match shape " + shape_to_string(shape_));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::min() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : data_) m = v < m ? v : m;
    return m;
}

double Tensor::max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : data_) m = v > m ? v : m;
    return m;
}

double Tensor::abs_max() const {
    double m = 0.0;
    for (double v : data_) m = std::abs(v) > m ? std::abs(v) : m;
    return m;
}

double Tensor::sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
}

double Tensor::mean() const {
    if (numel_ == 0) throw ShapeError("mean of empty tensor");
    return sum() / static_cast<double>(numel_);
}

Tensor Tensor::reshaped(std::vector<int64_t> shape) const {
    if (shape_numel(shape) != numel_)
        throw ShapeError("cannot reshape " + shape_str() + " to " + shape_to_string(shape));
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    out.numel_ = numel_;
    return out;
}

void Tensor::axpy(double alpha, const Tensor& b) {
    check_same_shape(*this, b, "axpy");
    const double* src = b.data();
    for (int64_t i = 0; i < numel_; ++i) data_[static_cast<size_t>(i)] += alpha * src[i];
}

void Tensor::fill(double v) { data_.assign(data_.size(), v); }

void Tensor::scale(double alpha) {
    for (double& v : data_) v *= alpha;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
}

std::string shape_to_string(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

}  // namespace dsmap
