#include "abo/dense.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "abo/simd.hpp"

namespace abo::linalg {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : buf_(rows * cols, fill), rows_(rows), cols_(cols) {}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    DenseMatrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw std::invalid_argument("from_rows: ragged rows");
        std::copy(row.begin(), row.end(), m.row(i).begin());
        ++i;
    }
    return m;
}

void DenseMatrix::make_room_for_row() {
    if (offset_ + rows_ < capacity_rows()) return;
    if (offset_ > 0) {
        std::memmove(buf_.data(), data(), size() * sizeof(double));
        offset_ = 0;
        return;
    }
    const std::size_t new_rows = std::max<std::size_t>(4, 2 * capacity_rows());
    buf_.resize(new_rows * cols_);
}

void DenseMatrix::push_row(std::span<const double> values) {
    if (values.size() != cols_) throw std::invalid_argument("push_row: length mismatch");
    make_room_for_row();
    std::copy(values.begin(), values.end(), data() + rows_ * cols_);
    ++rows_;
}

void DenseMatrix::push_zero_row() {
    make_room_for_row();
    std::fill_n(data() + rows_ * cols_, cols_, 0.0);
    ++rows_;
}

void DenseMatrix::pop_front_row() {
    if (rows_ == 0) throw std::out_of_range("pop_front_row on empty matrix");
    ++offset_;
    --rows_;
    if (rows_ == 0) offset_ = 0;
}

void DenseMatrix::clear_rows() {
    rows_ = 0;
    offset_ = 0;
}

DenseMatrix DenseMatrix::transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

bool DenseMatrix::all_finite() const {
    return std::all_of(data(), data() + size(), [](double v) { return std::isfinite(v); });
}

bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && std::equal(a.data(), a.data() + a.size(), b.data());
}

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matrix product: inner dimension mismatch");
    DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik != 0.0) simd::axpy(aik, b.row(k), dst);
        }
    }
    return out;
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("matrix difference: shape mismatch");
    DenseMatrix out = a;
    simd::axpy(-1.0, b.values(), {out.data(), out.size()});
    return out;
}

Vector matvec(const DenseMatrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw std::invalid_argument("matvec: dimension mismatch");
    Vector y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] = simd::dot(a.row(i), x);
    return y;
}

Vector matvec_transposed(const DenseMatrix& a, std::span<const double> x) {
    if (a.rows() != x.size()) throw std::invalid_argument("matvec_transposed: dimension mismatch");
    Vector y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) simd::axpy(x[i], a.row(i), y);
    return y;
}

double max_abs(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

double max_abs(const DenseMatrix& a) { return max_abs(a.values()); }

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("max_abs_diff: length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("max_abs_diff: shape mismatch");
    return max_abs_diff(a.values(), b.values());
}

double frobenius_norm(const DenseMatrix& a) { return std::sqrt(simd::sumsq(a.values())); }

double norm2(std::span<const double> x) { return std::sqrt(simd::sumsq(x)); }

}  // namespace abo::linalg
