#pragma once

#include <cstddef>
#include <span>

#include "abo/dense.hpp"

namespace abo::linalg {

// Plane rotation acting on rows (or vector entries) i and j:
//   [ c  s ] [x_i]
//   [-s  c ] [x_j]
struct GivensRotation {
    std::size_t i = 0;
    std::size_t j = 1;
    double c = 1.0;
    double s = 0.0;

    bool is_identity() const { return c == 1.0 && s == 0.0; }
};

// Rotation mapping (x, y) to (hypot(x, y), 0). Both zero gives the identity.
GivensRotation givens_from(double x, double y, std::size_t i = 0, std::size_t j = 1);

// Applies g to rows g.i and g.j of m, only touching columns >= col_begin.
void rotate_rows(DenseMatrix& m, const GivensRotation& g, std::size_t col_begin = 0);
// Right-multiplies m by the transposed rotation matrix, i.e. applies the same
// (c, s) combination to columns g.i and g.j.
void rotate_cols(DenseMatrix& m, const GivensRotation& g);
void rotate_entries(std::span<double> v, const GivensRotation& g);

// Value-returning form of rotate_rows.
DenseMatrix apply_rotation_left(DenseMatrix m, const GivensRotation& g);

}  // namespace abo::linalg
