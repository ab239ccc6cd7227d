#include "tweetsift/tensor.hpp"

#include <cmath>

namespace tweetsift {

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
    assert(a.cols() == b.rows());
    out = Tensor(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* o = out.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const double* brow = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) o[j] += aik * brow[j];
        }
    }
}

void matmul_at_b_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    assert(a.rows() == b.rows() && out.rows() == a.cols() && out.cols() == b.cols());
    const std::size_t n = b.cols();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double* brow = b.row(r).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double ari = a(r, i);
            double* o = out.row(i).data();
            for (std::size_t j = 0; j < n; ++j) o[j] += ari * brow[j];
        }
    }
}

void matmul_a_bt(const Tensor& a, const Tensor& b, Tensor& out) {
    assert(a.cols() == b.cols());
    out = Tensor(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
}

void add_row_bias(Tensor& m, const Tensor& bias) {
    assert(bias.size() == m.cols());
    const auto bv = bias.flat();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += bv[j];
    }
}

void acc_col_sums(const Tensor& m, Tensor& bias) {
    assert(bias.size() == m.cols());
    auto bv = bias.flat();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) bv[j] += r[j];
    }
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

}  // namespace tweetsift
