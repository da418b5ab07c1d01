#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace abo::linalg {

using Vector = std::vector<double>;

// Row-major dense matrix of doubles.
//
// Rows are contiguous, so every row can be handed to the SIMD kernels as a
// span. push_row()/pop_front_row() make the matrix usable as a sliding window
// of rows: popping the front is O(1) and storage is compacted lazily, so a
// push/pop cycle costs amortized O(cols).
class DenseMatrix {
  public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return rows_ * cols_; }
    bool empty() const { return size() == 0; }

    double& operator()(std::size_t i, std::size_t j) { return data()[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data()[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data() + i * cols_, cols_}; }

    double* data() { return buf_.data() + offset_ * cols_; }
    const double* data() const { return buf_.data() + offset_ * cols_; }
    std::span<const double> values() const { return {data(), size()}; }

    void push_row(std::span<const double> values);
    void push_zero_row();
    void pop_front_row();
    // Drops all rows, keeps the column count.
    void clear_rows();

    DenseMatrix transpose() const;
    bool all_finite() const;

    friend bool operator==(const DenseMatrix& a, const DenseMatrix& b);

  private:
    std::size_t capacity_rows() const { return cols_ == 0 ? 0 : buf_.size() / cols_; }
    void make_room_for_row();

    std::vector<double> buf_;
    std::size_t offset_ = 0;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
};

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
Vector matvec(const DenseMatrix& a, std::span<const double> x);
// a^T x
Vector matvec_transposed(const DenseMatrix& a, std::span<const double> x);

double max_abs(const DenseMatrix& a);
double max_abs(std::span<const double> x);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
double frobenius_norm(const DenseMatrix& a);
double norm2(std::span<const double> x);

}  // namespace abo::linalg
