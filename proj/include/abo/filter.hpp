#pragma once

// Sliding-window, exponentially weighted least squares on a QR factorization
// with an explicitly maintained pseudoinverse. Each step predicts with the
// current weights, appends the new row (after the forgetting scaling),
// updates the weights with the Greville/Cline gain, then removes the oldest
// row. beta is always the minimum-norm weighted least-squares solution on
// the current window.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>

#include <json.hpp>

#include "abo/dense.hpp"
#include "abo/qr.hpp"

namespace abo {

using linalg::DenseMatrix;
using linalg::Vector;

struct StepOutput {
    double prediction = 0.0;           // z^T beta before the update
    double test_residual = 0.0;        // y - prediction
    double train_residual_mean = 0.0;  // mean |y_i - z_i^T beta| over the window after the step
    double condition_number = 0.0;     // effective cond(R) after the step
    bool rank_deficient = false;       // R below full numerical rank after the step
    bool restarted = false;            // a cold restart happened during the step
};

struct FilterOptions {
    double lambda = 1.0;
    linalg::Tolerances tol;
    // Train residual and condition number are O(ND) / O(N^2 D) extras per step.
    bool diagnostics = true;
    // A rational downdate scales the rounding error already in r^+ by about
    // 1 / (1 - gamma). The product of these factors since the last batch
    // factorization is tracked; past this limit the window is refactored.
    // 0 disables the check.
    double growth_limit = 1e4;
};

class AboFilter {
  public:
    AboFilter(std::size_t window_len, std::size_t feature_dim, FilterOptions opts = {});

    // Batch start from exactly window_len rows (oldest first).
    void init(const DenseMatrix& z0, std::span<const double> y0);
    bool warmed_up() const { return initialized_; }

    double predict(std::span<const double> z) const;

    // Scale by sqrt(lambda), append (z, y), advance beta. Window grows to N + 1.
    linalg::AppendResult update(std::span<const double> z, double y);
    // Remove the oldest row. Window shrinks back to N.
    linalg::RemoveResult downdate();
    // predict, update, downdate, diagnostics.
    StepOutput step(std::span<const double> z, double y);

    double condition_number() const;
    linalg::ConditionInfo condition() const;
    double train_residual_mean() const;

    const linalg::QrFactors& factors() const { return factors_; }
    const Vector& beta() const { return beta_; }
    const Vector& transformed_rhs() const { return rhs_; }
    // Raw (unweighted) window, oldest row first.
    const DenseMatrix& window_z() const { return window_z_; }
    Vector window_y() const { return {window_y_.begin(), window_y_.end()}; }
    // r^+ g from the last downdate, g the removed row's basis coordinates.
    const Vector& last_k() const { return ws_.k; }

    double lambda() const { return opts_.lambda; }
    const FilterOptions& options() const { return opts_; }
    std::size_t window_len() const { return window_len_; }
    std::size_t feature_dim() const { return feature_dim_; }
    std::uint64_t step_count() const { return step_count_; }
    std::uint64_t restart_count() const { return restart_count_; }
    // Refactorizations triggered by error growth rather than a breakdown.
    std::uint64_t refresh_count() const { return refresh_count_; }
    double error_growth() const { return growth_; }

    nlohmann::json checkpoint() const;
    static AboFilter restore(const nlohmann::json& j);

  private:
    void check_row(std::span<const double> z) const;
    // Rebuild factors, rhs and beta from the buffered window.
    void cold_restart();
    void refactor_window();

    std::size_t window_len_;
    std::size_t feature_dim_;
    FilterOptions opts_;
    bool initialized_ = false;

    linalg::QrFactors factors_;
    Vector beta_;
    Vector rhs_;
    DenseMatrix window_z_;
    std::deque<double> window_y_;
    linalg::UpdateWorkspace ws_;

    std::uint64_t step_count_ = 0;
    std::uint64_t restart_count_ = 0;
    std::uint64_t refresh_count_ = 0;
    double growth_ = 1.0;
    bool restarted_in_step_ = false;
};

}  // namespace abo
