#include "abo/givens.hpp"

#include <cmath>
#include <stdexcept>

#include "abo/simd.hpp"

namespace abo::linalg {

GivensRotation givens_from(double x, double y, std::size_t i, std::size_t j) {
    if (i == j) throw std::invalid_argument("givens_from: rotation indices must differ");
    GivensRotation g{i, j, 1.0, 0.0};
    if (y == 0.0) {
        // Already zeroed; keep the identity unless the pivot needs a sign fix.
        if (x < 0.0) g.c = -1.0;
        return g;
    }
    const double r = std::hypot(x, y);
    g.c = x / r;
    g.s = y / r;
    return g;
}

void rotate_rows(DenseMatrix& m, const GivensRotation& g, std::size_t col_begin) {
    if (g.i >= m.rows() || g.j >= m.rows()) throw std::out_of_range("rotate_rows: row index out of range");
    if (g.is_identity() || col_begin >= m.cols()) return;
    const auto ri = m.row(g.i).subspan(col_begin);
    const auto rj = m.row(g.j).subspan(col_begin);
    simd::rot(ri, rj, g.c, g.s);
}

void rotate_cols(DenseMatrix& m, const GivensRotation& g) {
    if (g.i >= m.cols() || g.j >= m.cols()) throw std::out_of_range("rotate_cols: column index out of range");
    if (g.is_identity()) return;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double a = m(r, g.i);
        const double b = m(r, g.j);
        m(r, g.i) = g.c * a + g.s * b;
        m(r, g.j) = g.c * b - g.s * a;
    }
}

void rotate_entries(std::span<double> v, const GivensRotation& g) {
    if (g.i >= v.size() || g.j >= v.size()) throw std::out_of_range("rotate_entries: index out of range");
    const double a = v[g.i];
    const double b = v[g.j];
    v[g.i] = g.c * a + g.s * b;
    v[g.j] = g.c * b - g.s * a;
}

DenseMatrix apply_rotation_left(DenseMatrix m, const GivensRotation& g) {
    rotate_rows(m, g);
    return m;
}

}  // namespace abo::linalg
