#include "abo/qr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "abo/errors.hpp"
#include "abo/simd.hpp"
#include "eigen_interop.hpp"

namespace abo::linalg {
namespace {

using detail::as_eigen;
using detail::from_eigen;

bool finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// out = sum_i coeff[i] * m.row(i)
void combine_rows(const DenseMatrix& m, std::span<const double> coeff, Vector& out) {
    out.assign(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (coeff[i] != 0.0) simd::axpy(coeff[i], m.row(i), out);
    }
}

void row_dots(const DenseMatrix& m, std::span<const double> x, Vector& out) {
    out.resize(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = simd::dot(m.row(i), x);
}

DenseMatrix drop_first_row_and_col(const DenseMatrix& q) {
    const std::size_t n = q.rows() - 1;
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto src = q.row(i + 1).subspan(1);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

DenseMatrix grow_with_unit_corner(const DenseMatrix& q) {
    const std::size_t n = q.rows();
    DenseMatrix out(n + 1, n + 1);
    for (std::size_t i = 0; i < n; ++i) std::copy(q.row(i).begin(), q.row(i).end(), out.row(i).begin());
    out(n, n) = 1.0;
    return out;
}

DenseMatrix pseudoinverse_and_rank(const DenseMatrix& a, double rank_tol, std::size_t& rank);

}  // namespace

QrFactors qr_decompose(const DenseMatrix& z, const Tolerances& tol) {
    if (!z.all_finite()) throw std::invalid_argument("qr_decompose: non-finite input");
    QrFactors f;
    const std::size_t m = z.rows();
    const std::size_t d = z.cols();
    if (m == 0) {
        f.q = DenseMatrix(0, 0);
        f.r = DenseMatrix(0, d);
        f.r_pinv_t = DenseMatrix(0, d);
        return f;
    }
    const Eigen::MatrixXd ze = as_eigen(z);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(ze);
    const Eigen::MatrixXd q = qr.householderQ();
    f.q = from_eigen(q);
    f.r = DenseMatrix(m, d);
    const auto& packed = qr.matrixQR();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < d; ++j) f.r(i, j) = packed(i, j);
    f.r_pinv_t = pseudoinverse_and_rank(f.r, tol.rank, f.rank).transpose();
    return f;
}

namespace {

DenseMatrix pseudoinverse_and_rank(const DenseMatrix& a, double rank_tol, std::size_t& rank) {
    rank = 0;
    if (a.rows() == 0 || a.cols() == 0) return DenseMatrix(a.cols(), a.rows());
    const Eigen::MatrixXd ae = as_eigen(a);
    Eigen::JacobiSVD<Eigen::MatrixXd, Eigen::ColPivHouseholderQRPreconditioner> svd(
        ae, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double cutoff = s.size() > 0 ? rank_tol * s(0) : 0.0;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff && s(i) > 0.0) {
            inv(i) = 1.0 / s(i);
            ++rank;
        }
    }
    const Eigen::MatrixXd p = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
    return from_eigen(p);
}

}  // namespace

DenseMatrix pseudoinverse(const DenseMatrix& a, double rank_tol) {
    std::size_t rank = 0;
    return pseudoinverse_and_rank(a, rank_tol, rank);
}

void scale_for_forgetting(QrFactors& f, double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("forgetting factor must lie in (0, 1]");
    if (lambda == 1.0) return;
    const double root = std::sqrt(lambda);
    simd::scale(root, {f.r.data(), f.r.size()});
    simd::scale(1.0 / root, {f.r_pinv_t.data(), f.r_pinv_t.size()});
}

AppendResult pinv_append_row(QrFactors& f, std::span<const double> z_new, UpdateWorkspace& ws,
                             const Tolerances& tol) {
    const std::size_t d = z_new.size();
    if (f.rows() == 0 && f.feature_dim() != d) {
        f.r = DenseMatrix(0, d);
        f.r_pinv_t = DenseMatrix(0, d);
        f.q = DenseMatrix(0, 0);
    }
    if (f.feature_dim() != d) throw std::invalid_argument("pinv_append_row: feature dimension mismatch");
    if (!finite(z_new)) throw std::invalid_argument("pinv_append_row: non-finite row");

    DenseMatrix& r = f.r;
    DenseMatrix& p = f.r_pinv_t;
    const std::size_t m = r.rows();

    // c = z - r^+ (r z), h = z^T r^+
    row_dots(r, z_new, ws.rz);
    row_dots(p, z_new, ws.h);
    ws.c.assign(z_new.begin(), z_new.end());
    for (std::size_t i = 0; i < m; ++i) simd::axpy(-ws.rz[i], p.row(i), ws.c);

    AppendResult result;
    result.c_norm = norm2(ws.c);
    const double z_norm = norm2(z_new);
    // A full column rank factor cannot grow in rank: any c there is rounding.
    result.rank_increased = f.rank < d && result.c_norm > tol.rank * std::max(1.0, z_norm);

    if (result.rank_increased) {
        ws.gain_b = ws.c;
        simd::scale(1.0 / (result.c_norm * result.c_norm), ws.gain_b);
    } else {
        combine_rows(p, ws.h, ws.gain_b);
        result.denominator = 1.0 + simd::dot(ws.h, ws.h);
        simd::scale(1.0 / result.denominator, ws.gain_b);
    }
    if (!finite(ws.gain_b)) {
        throw NumericalBreakdown(NumericalBreakdown::Kind::non_finite, "pinv_append_row: non-finite gain");
    }

    // Stacked pseudoinverse [r^+ - b h, b], stored transposed.
    for (std::size_t i = 0; i < m; ++i) {
        if (ws.h[i] != 0.0) simd::axpy(-ws.h[i], ws.gain_b, p.row(i));
    }
    p.push_row(ws.gain_b);
    r.push_row(z_new);
    f.q = grow_with_unit_corner(f.q);
    if (result.rank_increased) ++f.rank;

    // Zero the new row against each pivot; (G A)^+ = A^+ G^T carries the
    // same rotations onto the rows of the stored transpose.
    ws.rotations.clear();
    const std::size_t limit = std::min(m, d);
    for (std::size_t j = 0; j < limit; ++j) {
        const GivensRotation g = givens_from(r(j, j), r(m, j), j, m);
        if (g.is_identity()) continue;
        rotate_rows(r, g, j);
        r(m, j) = 0.0;
        rotate_rows(p, g);
        rotate_cols(f.q, g);
        ws.rotations.push_back(g);
    }
    return result;
}

RemoveResult pinv_remove_row(QrFactors& f, std::span<const double> z_old, UpdateWorkspace& ws,
                             const Tolerances& tol) {
    DenseMatrix& r = f.r;
    DenseMatrix& p = f.r_pinv_t;
    const std::size_t m = r.rows();
    const std::size_t d = r.cols();
    if (m == 0) throw std::invalid_argument("pinv_remove_row: no rows to remove");
    if (z_old.size() != d) throw std::invalid_argument("pinv_remove_row: feature dimension mismatch");

    // g = first row of q: the removed observation's coordinates in the basis
    // of r. Rotating it onto e1 isolates that observation as row 0.
    ws.rotated_e1.assign(f.q.row(0).begin(), f.q.row(0).end());
    const auto& g = ws.rotated_e1;

    combine_rows(p, g, ws.k);   // k = r^+ g
    row_dots(p, z_old, ws.h);   // h = z_old^T r^+
    RemoveResult result;
    result.gamma = simd::dot(z_old, ws.k);
    if (!finite(ws.k) || !finite(ws.h) || !std::isfinite(result.gamma)) {
        throw NumericalBreakdown(NumericalBreakdown::Kind::non_finite, "pinv_remove_row: non-finite k or h");
    }

    // z_old must lie in the row space of r.
    row_dots(r, z_old, ws.rz);
    ws.c.assign(z_old.begin(), z_old.end());
    for (std::size_t i = 0; i < m; ++i) simd::axpy(-ws.rz[i], p.row(i), ws.c);
    const double z_norm = norm2(z_old);
    result.range_v = z_norm > 0.0 ? norm2(ws.c) / z_norm : 0.0;
    if (result.range_v > tol.range) {
        throw NumericalBreakdown(NumericalBreakdown::Kind::range_condition,
                                 "pinv_remove_row: removed row is outside the row space (relative residual " +
                                     std::to_string(result.range_v) + ")");
    }

    // u = (I - r r^+) g decides between the singular and nonsingular forms.
    // Rows of r at and below min(m, d) are zero, so those entries of u are
    // exactly g. 1 - z_old^T k equals ||u||^2 in exact arithmetic; summing
    // squares avoids the cancellation of the subtraction when gamma ~ 1.
    row_dots(r, ws.k, ws.rz);
    double u2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double ui = i < d ? g[i] - ws.rz[i] : g[i];
        u2 += ui * ui;
    }
    result.range_u = std::sqrt(u2);
    result.denominator = u2;

    if (result.range_u <= tol.range) {
        // r^+ <- (I - k k^+) r^+ (I - h^+ h), with 0^+ = 0.
        result.branch = DowndateBranch::projector;
        if (f.rank > 0) --f.rank;
        const double h_norm = norm2(ws.h);
        if (h_norm > 0.0) {
            Vector h_unit = ws.h;
            simd::scale(1.0 / h_norm, h_unit);
            combine_rows(p, h_unit, ws.c);
            for (std::size_t i = 0; i < m; ++i) simd::axpy(-h_unit[i], ws.c, p.row(i));
        }
        const double k_norm = norm2(ws.k);
        if (k_norm > 0.0) {
            ws.gain_b = ws.k;
            simd::scale(1.0 / k_norm, ws.gain_b);
            for (std::size_t i = 0; i < m; ++i) {
                const auto row = p.row(i);
                simd::axpy(-simd::dot(row, ws.gain_b), ws.gain_b, row);
            }
        }
    } else {
        // r^+ <- r^+ + k h / (1 - z_old^T k); the term this omits only
        // touches the column discarded below.
        result.branch = DowndateBranch::rational;
        const double den = result.denominator;
        if (std::abs(den) <= tol.denom) {
            throw NumericalBreakdown(NumericalBreakdown::Kind::denominator,
                                     "pinv_remove_row: downdate denominator below guard");
        }
        for (std::size_t i = 0; i < m; ++i) {
            if (ws.h[i] != 0.0) simd::axpy(ws.h[i] / den, ws.k, p.row(i));
        }
    }

    // Reduce g to alpha * e1 from the bottom up. r stays upper Hessenberg, so
    // dropping its first row leaves an upper-trapezoidal factor.
    Vector gv = g;
    ws.rotations.clear();
    for (std::size_t step = m; step-- > 1;) {
        const std::size_t top = step - 1;
        const GivensRotation rot = givens_from(gv[top], gv[step], top, step);
        if (rot.is_identity()) continue;
        rotate_entries(gv, rot);
        rotate_rows(r, rot, std::min(top, d));
        rotate_rows(p, rot);
        rotate_cols(f.q, rot);
        ws.rotations.push_back(rot);
    }
    // alpha = gv[0] is +1 by construction of givens_from; its sign would only
    // affect the row being discarded.
    r.pop_front_row();
    p.pop_front_row();
    f.q = drop_first_row_and_col(f.q);
    return result;
}

Vector forgetting_weights(std::size_t rows, double lambda) {
    Vector w(rows);
    const double root = std::sqrt(lambda);
    double acc = 1.0;
    for (std::size_t i = rows; i-- > 0;) {
        w[i] = acc;
        acc *= root;
    }
    return w;
}

Vector batch_weighted_minnorm(const DenseMatrix& z, std::span<const double> y, double lambda, double rank_tol) {
    if (z.rows() != y.size()) throw std::invalid_argument("batch_weighted_minnorm: row count mismatch");
    if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("forgetting factor must lie in (0, 1]");
    if (!z.all_finite() || !finite(y)) throw std::invalid_argument("batch_weighted_minnorm: non-finite input");
    const Vector w = forgetting_weights(z.rows(), lambda);
    Eigen::MatrixXd a = as_eigen(z);
    Eigen::VectorXd b(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) {
        a.row(static_cast<Eigen::Index>(i)) *= w[i];
        b(static_cast<Eigen::Index>(i)) = w[i] * y[i];
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(rank_tol);
    cod.compute(a);
    const Eigen::VectorXd x = cod.solve(b);
    return Vector(x.data(), x.data() + x.size());
}

double PenroseResiduals::max() const {
    return std::max({axa_minus_a, xax_minus_x, ax_asymmetry, xa_asymmetry});
}

PenroseResiduals penrose_residuals(const DenseMatrix& a, const DenseMatrix& a_pinv) {
    if (a.rows() != a_pinv.cols() || a.cols() != a_pinv.rows()) {
        throw std::invalid_argument("penrose_residuals: shape mismatch");
    }
    PenroseResiduals out;
    if (a.empty()) return out;
    const Eigen::MatrixXd ae = as_eigen(a);
    const Eigen::MatrixXd xe = as_eigen(a_pinv);
    const Eigen::MatrixXd ax = ae * xe;  // M x M
    out.axa_minus_a = (ax * ae - ae).cwiseAbs().maxCoeff();
    out.xax_minus_x = (xe * ax - xe).cwiseAbs().maxCoeff();
    out.ax_asymmetry = (ax - ax.transpose()).cwiseAbs().maxCoeff();
    const Eigen::Index m = ae.rows();
    const Eigen::Index d = ae.cols();
    if (d <= 2048) {
        const Eigen::MatrixXd xa = xe * ae;
        out.xa_asymmetry = (xa - xa.transpose()).cwiseAbs().maxCoeff();
    } else {
        // X A = X A with both factors of rank <= M. With [X, A^T] = U T,
        // X A - (X A)^T = U (T1 T2^T - T2 T1^T) U^T, whose Frobenius norm
        // bounds the max-abs entry without forming the D x D product.
        Eigen::MatrixXd stacked(d, 2 * m);
        stacked << xe, ae.transpose();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
        const Eigen::Index k = std::min<Eigen::Index>(d, 2 * m);
        const Eigen::MatrixXd t = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
        const Eigen::MatrixXd t1 = t.leftCols(m);
        const Eigen::MatrixXd t2 = t.rightCols(m);
        out.xa_asymmetry = (t1 * t2.transpose() - t2 * t1.transpose()).norm();
    }
    return out;
}

double orthogonality_error(const DenseMatrix& q) {
    if (q.empty()) return 0.0;
    const Eigen::MatrixXd qe = as_eigen(q);
    const Eigen::MatrixXd g = qe.transpose() * qe - Eigen::MatrixXd::Identity(qe.cols(), qe.cols());
    return g.cwiseAbs().maxCoeff();
}

double trapezoid_violation(const DenseMatrix& r) {
    double worst = 0.0;
    for (std::size_t i = 1; i < r.rows(); ++i)
        for (std::size_t j = 0; j < std::min(i, r.cols()); ++j) worst = std::max(worst, std::abs(r(i, j)));
    return worst;
}

}  // namespace abo::linalg

namespace abo::linalg {

ConditionInfo effective_condition(const DenseMatrix& r, double rank_tol) {
    ConditionInfo info;
    info.full = std::min(r.rows(), r.cols());
    if (info.full == 0) return info;

    auto from_singular = [&](const Eigen::VectorXd& s) {
        // s sorted descending
        const double top = s(0);
        if (!(top > 0.0)) {
            info.rank = 0;
            info.kappa = std::numeric_limits<double>::infinity();
            return;
        }
        double low = top;
        std::size_t rank = 0;
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            if (s(i) > rank_tol * top) {
                low = s(i);
                ++rank;
            }
        }
        info.rank = rank;
        info.kappa = top / low;
    };

    // Squaring halves the usable digits, so trust the Gram route only while
    // the eigenvalue spread stays well inside double precision.
    const std::size_t m = r.rows();
    if (m <= r.cols()) {
        Eigen::MatrixXd g(m, m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j <= i; ++j) g(i, j) = g(j, i) = simd::dot(r.row(i), r.row(j));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
        const Eigen::VectorXd ev = eig.eigenvalues();  // ascending
        const double top = ev(ev.size() - 1);
        const double bottom = ev(0);
        if (top > 0.0 && bottom > 1e-8 * top) {
            info.rank = m;
            info.kappa = std::sqrt(top / bottom);
            return info;
        }
    }
    const Eigen::MatrixXd re = detail::as_eigen(r);
    Eigen::JacobiSVD<Eigen::MatrixXd, Eigen::ColPivHouseholderQRPreconditioner> svd(re);
    from_singular(svd.singularValues());
    return info;
}

}  // namespace abo::linalg
