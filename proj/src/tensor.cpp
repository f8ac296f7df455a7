#include "razh/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace razh {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_)
        throw config_error("Tensor2: value count does not match rows*cols");
    for (double v : data_)
        if (!std::isfinite(v))
            throw numeric_error("Tensor2: non-finite entry at construction");
}

bool Tensor2::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    if (a.cols() != b.rows())
        throw config_error("matmul: inner dimensions differ");
    Tensor2 out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j)
                out.at(i, j) += aik * b.at(k, j);
        }
    }
    return out;
}

Tensor2 transpose(const Tensor2& a) {
    Tensor2 out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            out.at(j, i) = a.at(i, j);
    return out;
}

Tensor2 tanh_fwd(const Tensor2& x) {
    Tensor2 out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
    return out;
}

Tensor2 sigmoid(const Tensor2& x) {
    Tensor2 out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        // Stable on both tails.
        out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                          : std::exp(v) / (1.0 + std::exp(v));
    }
    return out;
}

Tensor2 softmax_rows(const Tensor2& x) {
    Tensor2 out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double mx = x.at(i, 0);
        for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double e = std::exp(x.at(i, j) - mx);
            out.at(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) /= sum;
    }
    return out;
}

double logcosh_scalar(double x) {
    // |x| + log1p(e^{-2|x|}) - ln 2; exact at 0, no overflow at large |x|.
    const double a = std::fabs(x);
    return a + std::log1p(std::exp(-2.0 * a)) - 0.6931471805599453094172321214581766;
}

Tensor2 logcosh(const Tensor2& x) {
    Tensor2 out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = logcosh_scalar(x[i]);
    return out;
}

Tensor2 identity(std::size_t n) {
    Tensor2 out(n, n);
    for (std::size_t i = 0; i < n; ++i) out.at(i, i) = 1.0;
    return out;
}

} // namespace razh
