#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace tweetsift {

// Dense row-major matrix of doubles. Kernels below use fixed loop orders so
// every output element is computed by the same sequence of operations no
// matter how many rows the operands have; this is what makes padding and
// batching invariance exact rather than approximate.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const noexcept {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    bool same_shape(const Tensor& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// out = a * b
void matmul(const Tensor& a, const Tensor& b, Tensor& out);
// out += a^T * b
void matmul_at_b_acc(const Tensor& a, const Tensor& b, Tensor& out);
// out = a * b^T
void matmul_a_bt(const Tensor& a, const Tensor& b, Tensor& out);
// Adds a 1×cols bias row to every row of m.
void add_row_bias(Tensor& m, const Tensor& bias);
// bias += column sums of m
void acc_col_sums(const Tensor& m, Tensor& bias);

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double l2_norm(std::span<const double> a) noexcept;

}  // namespace tweetsift
