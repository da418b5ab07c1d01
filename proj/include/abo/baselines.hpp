#pragma once

// Comparison models.
//
// CovRls    covariance-form rank-one RLS on the feature vectors: keeps the
//           Gram matrix and its pseudoinverse and updates both with the
//           Sherman-Morrison / Campbell-Meyer rank-one formulas. Never
//           symmetrized or restarted, so its drift is observable.
// QrdRls    windowed linear RLS on raw lags: Givens update and LINPACK-style
//           hyperbolic downdate of a ridge-initialized triangular factor.
// Krls      sliding-window RBF kernel ridge regression, solved directly each
//           step.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "abo/dense.hpp"
#include "abo/filter.hpp"

namespace abo {

class CovRls {
  public:
    // ||(I - A A^+) z|| above this (relative to max(1, ||z||)) raises the
    // rank on append; |1 - v^T A^+ v| below it lowers the rank on removal.
    static constexpr double kRangeTol = 1e-8;

    CovRls(std::size_t window_len, std::size_t feature_dim, double lambda = 1.0);

    void init(const DenseMatrix& z0, std::span<const double> y0);
    double predict(std::span<const double> z) const;
    StepOutput step(std::span<const double> z, double y);

    const Vector& beta() const { return beta_; }
    const DenseMatrix& gram() const { return gram_; }
    const DenseMatrix& gram_pinv() const { return gram_pinv_; }
    // ||P - P^T||_max of the maintained pseudoinverse.
    double symmetry_drift() const;
    // First step at which a non-finite value appeared, or -1.
    std::int64_t diverged_at() const { return diverged_at_; }
    // Rank of the Gram matrix as tracked through the branch decisions.
    std::size_t rank() const { return rank_; }
    std::uint64_t step_count() const { return step_count_; }
    const DenseMatrix& window_z() const { return window_z_; }
    Vector window_y() const { return {window_y_.begin(), window_y_.end()}; }
    double lambda() const { return lambda_; }

  private:
    void add_row(std::span<const double> z, double y);
    void remove_oldest();
    void refresh_beta();

    std::size_t window_len_;
    std::size_t feature_dim_;
    double lambda_;
    DenseMatrix gram_;
    DenseMatrix gram_pinv_;
    Vector xty_;
    Vector beta_;
    DenseMatrix window_z_;
    std::deque<double> window_y_;
    Vector t1_, t2_;
    std::size_t rank_ = 0;
    std::uint64_t step_count_ = 0;
    std::int64_t diverged_at_ = -1;
};

class QrdRls {
  public:
    static constexpr double kDefaultRidge = 1e-2;

    QrdRls(std::size_t lags, std::size_t window, double ridge = kDefaultRidge);

    // Feeds up to `window` samples without downdating.
    void init(const std::vector<Vector>& x0, std::span<const double> y0);
    double predict(std::span<const double> x) const;
    StepOutput step(std::span<const double> x, double y);

    // Solves R beta = rhs.
    Vector weights() const;
    const DenseMatrix& r() const { return r_; }
    // Downdates refused because the hyperbolic rotation did not exist.
    std::uint64_t failed_downdates() const { return failed_downdates_; }

  private:
    void append(std::span<const double> x, double y);
    bool remove(std::span<const double> x, double y);

    std::size_t lags_;
    std::size_t window_;
    double ridge_;
    DenseMatrix r_;
    Vector rhs_;
    Vector beta_;
    std::deque<Vector> xs_;
    std::deque<double> ys_;
    std::uint64_t failed_downdates_ = 0;
};

class Krls {
  public:
    static constexpr double kDefaultRidge = 1e-2;

    Krls(std::size_t window, double bandwidth, double ridge = kDefaultRidge);

    void init(const std::vector<Vector>& x0, std::span<const double> y0);
    double predict(std::span<const double> x) const;
    StepOutput step(std::span<const double> x, double y);

    std::size_t dictionary_size() const { return xs_.size(); }
    const Vector& alpha() const { return alpha_; }

  private:
    void push(std::span<const double> x, double y);
    void solve();

    std::size_t window_;
    double bandwidth_;
    double ridge_;
    std::deque<Vector> xs_;
    std::deque<double> ys_;
    DenseMatrix kernel_;  // kernel matrix of the dictionary, oldest first
    Vector alpha_;
};

}  // namespace abo
