#pragma once

#include <cstdint>
#include <random>

#include "abo/dense.hpp"

namespace abo::testing {

inline linalg::DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    linalg::DenseMatrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = n01(rng);
    return m;
}

// rows x cols with rank at most `rank`.
inline linalg::DenseMatrix random_low_rank(std::size_t rows, std::size_t cols, std::size_t rank,
                                           std::mt19937_64& rng) {
    return random_matrix(rows, rank, rng) * random_matrix(rank, cols, rng);
}

inline linalg::Vector random_vector(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    linalg::Vector v(n);
    for (auto& x : v) x = n01(rng);
    return v;
}

inline linalg::DenseMatrix drop_first_row(const linalg::DenseMatrix& m) {
    linalg::DenseMatrix out(m.rows() - 1, m.cols());
    for (std::size_t i = 1; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i - 1, j) = m(i, j);
    return out;
}

inline linalg::DenseMatrix append_row(const linalg::DenseMatrix& m, const linalg::Vector& row) {
    linalg::DenseMatrix out = m;
    out.push_row(row);
    return out;
}

}  // namespace abo::testing
