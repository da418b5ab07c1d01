#pragma once

// QR factors with an explicitly maintained Moore-Penrose pseudoinverse, and
// the row append / row removal recursions that keep all three in sync.
//
// Shapes: for a window of M rows and D features, q is M x M orthogonal, r is
// M x D upper trapezoidal and the pseudoinverse r^+ is D x M. The
// pseudoinverse is stored transposed (M x D, field r_pinv_t) so that every
// update touches contiguous rows of length D.

#include <cstddef>
#include <span>
#include <vector>

#include "abo/dense.hpp"
#include "abo/givens.hpp"

namespace abo::linalg {

struct Tolerances {
    // Row append is rank increasing iff ||c|| > rank * max(1, ||z||); also the
    // relative singular value cutoff of the batch pseudoinverse.
    double rank = 1e-10;
    // Relative tolerance on the downdate range conditions.
    double range = 1e-8;
    // Breakdown guard on |1 - z^T r^+ g| in the rational downdate.
    double denom = 1e-12;
};

struct QrFactors {
    DenseMatrix q;
    DenseMatrix r;
    DenseMatrix r_pinv_t;
    // Numerical rank, carried through the recursions. An append can only
    // raise it while it is below the column count.
    std::size_t rank = 0;

    std::size_t rows() const { return r.rows(); }
    std::size_t feature_dim() const { return r.cols(); }
    // D x M pseudoinverse of r.
    DenseMatrix r_pinv() const { return r_pinv_t.transpose(); }
};

// Scratch vectors shared by the append and remove recursions. Contents are
// only meaningful until the next call.
struct UpdateWorkspace {
    Vector c;       // (I - r^+ r) z, the part of z outside the row space
    Vector h;       // z^T r^+
    Vector k;       // r^+ g (remove only)
    Vector gain_b;  // column appended to r^+
    Vector rz;
    Vector rotated_e1;
    // Rotations applied to the rows by the last call, in application order.
    std::vector<GivensRotation> rotations;
};

struct AppendResult {
    bool rank_increased = false;
    double c_norm = 0.0;
    // 1 + h h^T, the dependent-branch denominator (1 when rank increased).
    double denominator = 1.0;
};

enum class DowndateBranch { projector, rational };

struct RemoveResult {
    DowndateBranch branch = DowndateBranch::projector;
    // z_old^T r^+ g, the quantity whose distance from 1 drives the rational branch.
    double gamma = 0.0;
    // ||(I - r r^+) g|| and ||(I - r^+ r) z_old|| / ||z_old||.
    double range_u = 0.0;
    double range_v = 0.0;
    // Rational-branch denominator 1 - gamma, evaluated as ||u||^2.
    double denominator = 0.0;
};

// Batch Householder QR with explicit Q and an SVD-based pseudoinverse of R
// (singular values below tol.rank * sigma_max are treated as zero).
QrFactors qr_decompose(const DenseMatrix& z, const Tolerances& tol = {});

// Batch rank-revealing pseudoinverse (SVD, relative cutoff rank_tol).
DenseMatrix pseudoinverse(const DenseMatrix& a, double rank_tol = 1e-10);

// r <- sqrt(lambda) r, r^+ <- r^+ / sqrt(lambda).
void scale_for_forgetting(QrFactors& f, double lambda);

// Appends z_new as a new last row and re-triangularizes with Givens
// rotations. The pseudoinverse of the stacked matrix is formed by the
// Greville/Cline rank-one formula and the rotations are absorbed on the right.
// q grows by one row and column. ws.gain_b holds the appended column of the
// stacked pseudoinverse (the Kalman-type gain) and ws.rotations the rotations
// to replay on the transformed right-hand side.
//
// Throws NumericalBreakdown on a non-finite gain.
AppendResult pinv_append_row(QrFactors& f, std::span<const double> z_new, UpdateWorkspace& ws,
                             const Tolerances& tol = {});

// Removes the window row whose (already weighted) value is z_old and whose
// coordinates in the factored basis are the first row of q. Rotations reduce
// the first row of q to e1, the pseudoinverse is downdated by the projector
// formula when the rotated e1 lies in range(r) and by the rational
// Sherman-Morrison form otherwise, and the isolated first row is dropped.
// ws.k and ws.rotated_e1 are left populated for the weight downdate.
//
// Throws NumericalBreakdown when the rational denominator is below
// tol.denom, when z_old is not in the row space of r, or on non-finite output.
RemoveResult pinv_remove_row(QrFactors& f, std::span<const double> z_old, UpdateWorkspace& ws,
                             const Tolerances& tol = {});

// Minimum-norm minimizer of sum_i lambda^(N-1-i) (y_i - z_i^T b)^2 where row
// N-1 is the newest, from one complete orthogonal decomposition of the
// sqrt(lambda)-weighted system.
Vector batch_weighted_minnorm(const DenseMatrix& z, std::span<const double> y, double lambda,
                              double rank_tol = 1e-10);

// Row weights sqrt(lambda)^(rows-1-i), oldest row first.
Vector forgetting_weights(std::size_t rows, double lambda);

struct PenroseResiduals {
    double axa_minus_a = 0.0;   // ||A X A - A||_max
    double xax_minus_x = 0.0;   // ||X A X - X||_max
    double ax_asymmetry = 0.0;  // ||A X - (A X)^T||_max
    double xa_asymmetry = 0.0;  // ||X A - (X A)^T||_max
    double max() const;
};

PenroseResiduals penrose_residuals(const DenseMatrix& a, const DenseMatrix& a_pinv);
// ||q^T q - I||_max
double orthogonality_error(const DenseMatrix& q);
// Largest |r(i, j)| with j < i.
double trapezoid_violation(const DenseMatrix& r);

}  // namespace abo::linalg

namespace abo::linalg {

struct ConditionInfo {
    double kappa = 1.0;       // sigma_max / smallest singular value above the cutoff
    std::size_t rank = 0;     // numerical rank at cutoff rank_tol * sigma_max
    std::size_t full = 0;     // min(rows, cols)
    bool rank_deficient() const { return rank < full; }
};

// Effective condition number of a (typically wide) matrix. Uses the Gram
// matrix when the spread is mild and falls back to an SVD otherwise.
ConditionInfo effective_condition(const DenseMatrix& r, double rank_tol = 1e-10);

}  // namespace abo::linalg
