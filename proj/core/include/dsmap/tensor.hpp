#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "dsmap/error.hpp"

namespace dsmap {

/// Dense row-major array of doubles, rank 0 to 4.
///
/// Value semantics: copies copy the buffer. All network activations,
/// parameters, images and feature matrices in this library are Tensors;
/// images use the layout batch x channels x height x width.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int64_t> shape);
    Tensor(std::vector<int64_t> shape, double fill);
    Tensor(std::vector<int64_t> shape, std::vector<double> values);

    static Tensor scalar(double v);
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }
    static Tensor full_like(const Tensor& t, double v) { return Tensor(t.shape(), v); }

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t ndim() const { return static_cast<int64_t>(shape_.size()); }
    int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return numel_; }
    bool empty() const { return numel_ == 0; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 2-D and 4-D indexing; callers guarantee rank.
    double& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
    double at(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
    double& at(int64_t b, int64_t c, int64_t y, int64_t x) {
        return data_[static_cast<size_t>(((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
    }
    double at(int64_t b, int64_t c, int64_t y, int64_t x) const {
        return data_[static_cast<size_t>(((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    double min() const;
    double max() const;
    double abs_max() const;
    double sum() const;
    double mean() const;

    Tensor reshaped(std::vector<int64_t> shape) const;

    /// In-place a += alpha * b. Shapes must match.
    void axpy(double alpha, const Tensor& b);
    void fill(double v);
    void scale(double alpha);

    std::string shape_str() const;

private:
    std::vector<int64_t> shape_;
    std::vector<double> data_;
    int64_t numel_ = 0;
};

/// Throws ShapeError unless both tensors have identical shapes.
void check_same_shape(const Tensor& a, const Tensor& b, const char* what);

std::string shape_to_string(const std::vector<int64_t>& shape);

}  // namespace dsmap
