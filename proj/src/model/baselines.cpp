#include "abo/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "../linalg/eigen_interop.hpp"
#include "abo/qr.hpp"
#include "abo/rff.hpp"
#include "abo/simd.hpp"

namespace abo {

namespace {

bool finite_all(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// m += a x^T + x a^T, row by row.
void add_sym_rank2(DenseMatrix& m, std::span<const double> a, std::span<const double> x) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        simd::axpy(a[i], x, m.row(i));
        simd::axpy(x[i], a, m.row(i));
    }
}

void add_rank1(DenseMatrix& m, double alpha, std::span<const double> a, std::span<const double> b) {
    for (std::size_t i = 0; i < m.rows(); ++i) simd::axpy(alpha * a[i], b, m.row(i));
}

void matvec_into(const DenseMatrix& m, std::span<const double> x, Vector& out) {
    out.resize(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = simd::dot(m.row(i), x);
}

}  // namespace

// ---------------------------------------------------------------- CovRls

CovRls::CovRls(std::size_t window_len, std::size_t feature_dim, double lambda)
    : window_len_(window_len), feature_dim_(feature_dim), lambda_(lambda) {
    if (window_len == 0 || feature_dim == 0) throw std::invalid_argument("CovRls: empty window or feature dimension");
    if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("CovRls: lambda must be in (0, 1]");
    gram_ = DenseMatrix(feature_dim, feature_dim);
    gram_pinv_ = DenseMatrix(feature_dim, feature_dim);
    xty_.assign(feature_dim, 0.0);
    beta_.assign(feature_dim, 0.0);
    window_z_ = DenseMatrix(0, feature_dim);
}

void CovRls::init(const DenseMatrix& z0, std::span<const double> y0) {
    if (z0.rows() != window_len_ || z0.cols() != feature_dim_ || y0.size() != window_len_)
        throw std::invalid_argument("CovRls::init: expected window_len rows of feature_dim");
    const Vector w = linalg::forgetting_weights(window_len_, lambda_);
    DenseMatrix zw = z0;
    std::fill(xty_.begin(), xty_.end(), 0.0);
    for (std::size_t i = 0; i < zw.rows(); ++i) {
        simd::scale(w[i], zw.row(i));
        simd::axpy(w[i] * y0[i], zw.row(i), xty_);
    }
    auto zw_e = linalg::detail::as_eigen(zw);
    linalg::detail::as_eigen(gram_) = zw_e.transpose() * zw_e;
    // (Z^T Z)^+ = Z^+ Z^+^T
    const DenseMatrix zp = linalg::pseudoinverse(zw);
    auto zp_e = linalg::detail::as_eigen(zp);
    linalg::detail::as_eigen(gram_pinv_) = zp_e * zp_e.transpose();
    rank_ = linalg::effective_condition(zw).rank;

    window_z_ = z0;
    window_y_.assign(y0.begin(), y0.end());
    step_count_ = 0;
    diverged_at_ = -1;
    refresh_beta();
}

double CovRls::predict(std::span<const double> z) const { return simd::dot(z, beta_); }

void CovRls::refresh_beta() { matvec_into(gram_pinv_, xty_, beta_); }

void CovRls::add_row(std::span<const double> z, double y) {
    if (lambda_ != 1.0) {
        for (std::size_t i = 0; i < feature_dim_; ++i) {
            simd::scale(lambda_, gram_.row(i));
            simd::scale(1.0 / lambda_, gram_pinv_.row(i));
        }
        simd::scale(lambda_, xty_);
    }
    Vector& k = t1_;
    matvec_into(gram_pinv_, z, k);
    const double beta = 1.0 + simd::dot(z, k);
    Vector& u = t2_;
    double uu = 0.0;
    if (rank_ < feature_dim_) {
        // A singular: u = (I - A A^+) z decides whether the rank grows.
        matvec_into(gram_, k, u);
        for (std::size_t i = 0; i < feature_dim_; ++i) u[i] = z[i] - u[i];
        uu = simd::sumsq(u);
    }
    if (uu > kRangeTol * kRangeTol * std::max(1.0, simd::sumsq(z))) {
        ++rank_;
        // P - (k u^T + u k^T)/|u|^2 + beta u u^T/|u|^4
        Vector ks(k);
        simd::scale(-1.0 / uu, ks);
        add_sym_rank2(gram_pinv_, ks, u);
        add_rank1(gram_pinv_, beta / (uu * uu), u, u);
    } else {
        add_rank1(gram_pinv_, -1.0 / beta, k, k);
    }
    add_rank1(gram_, 1.0, z, z);
    simd::axpy(y, z, xty_);
    window_z_.push_row(z);
    window_y_.push_back(y);
}

void CovRls::remove_oldest() {
    // The oldest row carries weight lambda^N in the Gram matrix.
    const double w = std::pow(std::sqrt(lambda_), static_cast<double>(window_len_));
    Vector v(window_z_.row(0).begin(), window_z_.row(0).end());
    simd::scale(w, v);
    const double yv = w * window_y_.front();

    Vector& k = t1_;
    matvec_into(gram_pinv_, v, k);
    const double gamma = 1.0 - simd::dot(v, k);
    if (std::abs(gamma) <= kRangeTol && rank_ > 0) {
        // v has leverage one, the rank drops: (I - kk^T/|k|^2) P (I - kk^T/|k|^2).
        --rank_;
        const double kk = simd::sumsq(k);
        if (kk > 0.0) {
            Vector kh(k);
            simd::scale(1.0 / std::sqrt(kk), kh);
            Vector& pk = t2_;
            matvec_into(gram_pinv_, kh, pk);
            const double kpk = simd::dot(kh, pk);
            simd::scale(-1.0, pk);
            add_sym_rank2(gram_pinv_, kh, pk);
            add_rank1(gram_pinv_, kpk, kh, kh);
        }
    } else {
        add_rank1(gram_pinv_, 1.0 / gamma, k, k);
    }
    add_rank1(gram_, -1.0, v, v);
    simd::axpy(-yv, v, xty_);
    window_z_.pop_front_row();
    window_y_.pop_front();
}

StepOutput CovRls::step(std::span<const double> z, double y) {
    if (z.size() != feature_dim_) throw std::invalid_argument("CovRls::step: feature dimension mismatch");
    StepOutput out;
    out.prediction = predict(z);
    out.test_residual = y - out.prediction;
    add_row(z, y);
    remove_oldest();
    refresh_beta();
    ++step_count_;

    double acc = 0.0;
    for (std::size_t i = 0; i < window_z_.rows(); ++i)
        acc += std::abs(window_y_[i] - simd::dot(window_z_.row(i), beta_));
    out.train_residual_mean = acc / static_cast<double>(window_z_.rows());
    out.condition_number = std::numeric_limits<double>::quiet_NaN();
    if (diverged_at_ < 0 && !(finite_all(beta_) && std::isfinite(out.prediction)))
        diverged_at_ = static_cast<std::int64_t>(step_count_);
    return out;
}

double CovRls::symmetry_drift() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < feature_dim_; ++i)
        for (std::size_t j = i + 1; j < feature_dim_; ++j) {
            const double d = std::abs(gram_pinv_(i, j) - gram_pinv_(j, i));
            if (!(d <= worst)) worst = d;  // NaN sticks
        }
    return worst;
}

// ---------------------------------------------------------------- QrdRls

QrdRls::QrdRls(std::size_t lags, std::size_t window, double ridge)
    : lags_(lags), window_(window), ridge_(ridge) {
    if (lags == 0 || window == 0) throw std::invalid_argument("QrdRls: lags and window must be positive");
    if (!(ridge > 0.0)) throw std::invalid_argument("QrdRls: ridge must be positive");
    r_ = DenseMatrix(lags, lags);
    for (std::size_t i = 0; i < lags; ++i) r_(i, i) = std::sqrt(ridge);
    rhs_.assign(lags, 0.0);
    beta_.assign(lags, 0.0);
}

void QrdRls::init(const std::vector<Vector>& x0, std::span<const double> y0) {
    if (x0.size() != y0.size()) throw std::invalid_argument("QrdRls::init: size mismatch");
    if (x0.size() > window_) throw std::invalid_argument("QrdRls::init: more samples than the window");
    for (std::size_t i = 0; i < x0.size(); ++i) append(x0[i], y0[i]);
    beta_ = weights();
}

void QrdRls::append(std::span<const double> x, double y) {
    if (x.size() != lags_) throw std::invalid_argument("QrdRls: lag dimension mismatch");
    Vector row(x.begin(), x.end());
    double yy = y;
    for (std::size_t j = 0; j < lags_; ++j) {
        const auto g = linalg::givens_from(r_(j, j), row[j]);
        if (g.is_identity()) continue;
        simd::rot(r_.row(j).subspan(j), std::span<double>(row).subspan(j), g.c, g.s);
        const double a = rhs_[j];
        rhs_[j] = g.c * a + g.s * yy;
        yy = g.c * yy - g.s * a;
    }
    xs_.emplace_back(x.begin(), x.end());
    ys_.push_back(y);
}

// LINPACK dchdd-style downdate of R^T R - x x^T and the matching rhs.
bool QrdRls::remove(std::span<const double> x, double y) {
    const std::size_t p = lags_;
    Vector s(p), c(p);
    for (std::size_t i = 0; i < p; ++i) {
        double acc = x[i];
        for (std::size_t k = 0; k < i; ++k) acc -= r_(k, i) * s[k];
        s[i] = acc / r_(i, i);
    }
    const double nrm = linalg::norm2(s);
    if (!(nrm < 1.0)) return false;
    double alpha = std::sqrt(1.0 - nrm * nrm);
    for (std::size_t ii = 0; ii < p; ++ii) {
        const std::size_t i = p - 1 - ii;
        const double scl = alpha + std::abs(s[i]);
        const double a = alpha / scl;
        const double b = s[i] / scl;
        const double n = std::sqrt(a * a + b * b);
        c[i] = a / n;
        s[i] = b / n;
        alpha = scl * n;
    }
    for (std::size_t j = 0; j < p; ++j) {
        double xx = 0.0;
        for (std::size_t ii = 0; ii <= j; ++ii) {
            const std::size_t i = j - ii;
            const double t = c[i] * xx + s[i] * r_(i, j);
            r_(i, j) = c[i] * r_(i, j) - s[i] * xx;
            xx = t;
        }
    }
    double zeta = y;
    for (std::size_t i = 0; i < p; ++i) {
        rhs_[i] = (rhs_[i] - s[i] * zeta) / c[i];
        zeta = c[i] * zeta - s[i] * rhs_[i];
    }
    return true;
}

Vector QrdRls::weights() const {
    Vector b(lags_);
    for (std::size_t ii = 0; ii < lags_; ++ii) {
        const std::size_t i = lags_ - 1 - ii;
        double acc = rhs_[i];
        for (std::size_t j = i + 1; j < lags_; ++j) acc -= r_(i, j) * b[j];
        b[i] = acc / r_(i, i);
    }
    return b;
}

double QrdRls::predict(std::span<const double> x) const { return simd::dot(x, beta_); }

StepOutput QrdRls::step(std::span<const double> x, double y) {
    StepOutput out;
    out.prediction = predict(x);
    out.test_residual = y - out.prediction;
    append(x, y);
    if (xs_.size() > window_) {
        const Vector xo = std::move(xs_.front());
        const double yo = ys_.front();
        xs_.pop_front();
        ys_.pop_front();
        if (!remove(xo, yo)) {
            // Rebuild from the ridge and the remaining window.
            ++failed_downdates_;
            std::deque<Vector> xs;
            std::deque<double> ys;
            xs.swap(xs_);
            ys.swap(ys_);
            r_ = DenseMatrix(lags_, lags_);
            for (std::size_t i = 0; i < lags_; ++i) r_(i, i) = std::sqrt(ridge_);
            std::fill(rhs_.begin(), rhs_.end(), 0.0);
            for (std::size_t i = 0; i < xs.size(); ++i) append(xs[i], ys[i]);
            out.restarted = true;
        }
    }
    beta_ = weights();
    double acc = 0.0;
    for (std::size_t i = 0; i < xs_.size(); ++i) acc += std::abs(ys_[i] - simd::dot(xs_[i], beta_));
    out.train_residual_mean = acc / static_cast<double>(xs_.size());
    double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lags_; ++i) {
        dmax = std::max(dmax, std::abs(r_(i, i)));
        dmin = std::min(dmin, std::abs(r_(i, i)));
    }
    // Diagonal ratio: a cheap lower bound on cond(R).
    out.condition_number = dmax / dmin;
    return out;
}

// ---------------------------------------------------------------- Krls

Krls::Krls(std::size_t window, double bandwidth, double ridge)
    : window_(window), bandwidth_(bandwidth), ridge_(ridge) {
    if (window == 0) throw std::invalid_argument("Krls: window must be positive");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("Krls: bandwidth must be positive");
    if (!(ridge >= 0.0)) throw std::invalid_argument("Krls: ridge must be non-negative");
}


void Krls::init(const std::vector<Vector>& x0, std::span<const double> y0) {
    if (x0.size() != y0.size()) throw std::invalid_argument("Krls::init: size mismatch");
    for (std::size_t i = 0; i < x0.size(); ++i) push(x0[i], y0[i]);
    solve();
}

void Krls::push(std::span<const double> x, double y) {
    if (!xs_.empty() && x.size() != xs_.front().size()) throw std::invalid_argument("Krls: input dimension mismatch");
    std::size_t n = xs_.size();
    if (n == window_) {
        xs_.pop_front();
        ys_.pop_front();
        DenseMatrix shifted(n - 1, n - 1);
        for (std::size_t i = 1; i < n; ++i)
            for (std::size_t j = 1; j < n; ++j) shifted(i - 1, j - 1) = kernel_(i, j);
        kernel_ = std::move(shifted);
        --n;
    }
    DenseMatrix grown(n + 1, n + 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) grown(i, j) = kernel_(i, j);
    for (std::size_t i = 0; i < n; ++i) grown(i, n) = grown(n, i) = rff::gaussian_kernel(xs_[i], x, bandwidth_);
    grown(n, n) = 1.0;
    kernel_ = std::move(grown);
    xs_.emplace_back(x.begin(), x.end());
    ys_.push_back(y);
}

void Krls::solve() {
    const std::size_t n = xs_.size();
    alpha_.assign(n, 0.0);
    if (n == 0) return;
    Eigen::MatrixXd k = linalg::detail::as_eigen(kernel_);
    k.diagonal().array() += ridge_;
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = ys_[i];
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    Eigen::VectorXd a;
    if (llt.info() == Eigen::Success) {
        a = llt.solve(y);
    } else {
        // Only reachable with ridge 0 and repeated points.
        a = k.completeOrthogonalDecomposition().solve(y);
    }
    for (std::size_t i = 0; i < n; ++i) alpha_[i] = a(static_cast<Eigen::Index>(i));
}

double Krls::predict(std::span<const double> x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < xs_.size(); ++i) acc += alpha_[i] * rff::gaussian_kernel(xs_[i], x, bandwidth_);
    return acc;
}

StepOutput Krls::step(std::span<const double> x, double y) {
    StepOutput out;
    out.prediction = predict(x);
    out.test_residual = y - out.prediction;
    push(x, y);
    solve();
    double acc = 0.0;
    for (std::size_t i = 0; i < xs_.size(); ++i) {
        double f = 0.0;
        for (std::size_t j = 0; j < xs_.size(); ++j) f += kernel_(i, j) * alpha_[j];
        acc += std::abs(ys_[i] - f);
    }
    out.train_residual_mean = acc / static_cast<double>(xs_.size());
    out.condition_number = std::numeric_limits<double>::quiet_NaN();
    return out;
}

}  // namespace abo
