#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "razh/errors.hpp"

namespace razh {

/// Dense row-major real-64 matrix. The only array type in the library;
/// vectors are n x 1 (columns) or 1 x n (rows) as context demands.
class Tensor2 {
public:
    Tensor2() = default;

    Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    /// Construct from existing values. Rejects NaN/Inf and size mismatch.
    Tensor2(std::size_t rows, std::size_t cols, std::vector<double> values);

    Tensor2(std::size_t rows, std::size_t cols, std::initializer_list<double> values)
        : Tensor2(rows, cols, std::vector<double>(values)) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor2& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool all_finite() const;

    void fill(double v) { for (double& x : data_) x = v; }

    bool operator==(const Tensor2& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Forward math used everywhere. Deterministic accumulation order
// (row-major loops) so runs are bit-reproducible under a fixed seed.
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
Tensor2 transpose(const Tensor2& a);
Tensor2 tanh_fwd(const Tensor2& x);
Tensor2 sigmoid(const Tensor2& x);
Tensor2 softmax_rows(const Tensor2& x);
Tensor2 logcosh(const Tensor2& x);
double logcosh_scalar(double x);

Tensor2 identity(std::size_t n);

} // namespace razh
