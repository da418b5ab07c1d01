#include "abo/filter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "abo/errors.hpp"
#include "abo/simd.hpp"

namespace abo {
namespace {

using linalg::DowndateBranch;

bool finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void replay(const std::vector<linalg::GivensRotation>& rotations, Vector& v) {
    for (const auto& g : rotations) linalg::rotate_entries(v, g);
}

nlohmann::json matrix_to_json(const DenseMatrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", Vector(m.values().begin(), m.values().end())}};
}

DenseMatrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    const auto data = j.at("data").get<Vector>();
    if (data.size() != rows * cols) throw std::invalid_argument("checkpoint: matrix data has the wrong length");
    DenseMatrix m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

}  // namespace

AboFilter::AboFilter(std::size_t window_len, std::size_t feature_dim, FilterOptions opts)
    : window_len_(window_len), feature_dim_(feature_dim), opts_(opts), window_z_(0, feature_dim) {
    if (window_len == 0 || feature_dim == 0) throw std::invalid_argument("window and feature dimension must be >= 1");
    if (!(opts.lambda > 0.0 && opts.lambda <= 1.0)) throw std::invalid_argument("forgetting factor must lie in (0, 1]");
}

void AboFilter::check_row(std::span<const double> z) const {
    if (z.size() != feature_dim_) {
        throw std::invalid_argument("expected a feature vector of length " + std::to_string(feature_dim_) + ", got " +
                                    std::to_string(z.size()));
    }
}

void AboFilter::init(const DenseMatrix& z0, std::span<const double> y0) {
    if (z0.rows() != window_len_ || z0.cols() != feature_dim_ || y0.size() != window_len_) {
        throw std::invalid_argument("init: expected a " + std::to_string(window_len_) + " x " +
                                    std::to_string(feature_dim_) + " window with matching targets");
    }
    if (!z0.all_finite() || !finite(y0)) throw std::invalid_argument("init: non-finite input");
    window_z_ = z0;
    window_y_.assign(y0.begin(), y0.end());
    refactor_window();
    initialized_ = true;
}

void AboFilter::refactor_window() {
    const std::size_t m = window_z_.rows();
    const Vector w = linalg::forgetting_weights(m, opts_.lambda);
    DenseMatrix zw = window_z_;
    Vector yw(m);
    for (std::size_t i = 0; i < m; ++i) {
        simd::scale(w[i], zw.row(i));
        yw[i] = w[i] * window_y_[i];
    }
    factors_ = linalg::qr_decompose(zw, opts_.tol);
    rhs_ = linalg::matvec_transposed(factors_.q, yw);  // Q^T y
    beta_.assign(feature_dim_, 0.0);
    for (std::size_t i = 0; i < m; ++i) simd::axpy(rhs_[i], factors_.r_pinv_t.row(i), beta_);
    growth_ = 1.0;
}

void AboFilter::cold_restart() {
    refactor_window();
    ++restart_count_;
    restarted_in_step_ = true;
}

double AboFilter::predict(std::span<const double> z) const {
    check_row(z);
    return simd::dot(z, beta_);
}

linalg::AppendResult AboFilter::update(std::span<const double> z, double y) {
    if (!initialized_) throw std::logic_error("update before init");
    check_row(z);
    if (!finite(z) || !std::isfinite(y)) throw std::invalid_argument("update: non-finite sample");

    linalg::AppendResult res;
    bool recorded = false;
    try {
        linalg::scale_for_forgetting(factors_, opts_.lambda);
        if (opts_.lambda != 1.0) simd::scale(std::sqrt(opts_.lambda), rhs_);
        res = linalg::pinv_append_row(factors_, z, ws_, opts_.tol);
        const double innovation = y - simd::dot(z, beta_);
        rhs_.push_back(y);
        replay(ws_.rotations, rhs_);
        simd::axpy(innovation, ws_.gain_b, beta_);
        window_z_.push_row(z);
        window_y_.push_back(y);
        recorded = true;
        if (!finite(beta_)) throw NumericalBreakdown(NumericalBreakdown::Kind::non_finite, "non-finite weights");
    } catch (const NumericalBreakdown&) {
        if (!recorded) {
            window_z_.push_row(z);
            window_y_.push_back(y);
        }
        cold_restart();
    }
    return res;
}

linalg::RemoveResult AboFilter::downdate() {
    if (!initialized_) throw std::logic_error("downdate before init");
    const std::size_t m = window_z_.rows();
    if (m < 2) throw std::logic_error("downdate needs at least two window rows");

    // The oldest row carries weight sqrt(lambda)^(m-1) in the factored system.
    const double weight = linalg::forgetting_weights(m, opts_.lambda)[0];
    Vector v(window_z_.row(0).begin(), window_z_.row(0).end());
    simd::scale(weight, v);
    const double yv = weight * window_y_.front();

    linalg::RemoveResult res;
    try {
        res = linalg::pinv_remove_row(factors_, v, ws_, opts_.tol);
        if (res.branch == DowndateBranch::projector) {
            // beta <- (I - k k^+) beta
            const double kk = simd::dot(ws_.k, ws_.k);
            if (kk > 0.0) simd::axpy(-simd::dot(ws_.k, beta_) / kk, ws_.k, beta_);
        } else {
            const double innovation = yv - simd::dot(v, beta_);
            simd::axpy(-innovation / res.denominator, ws_.k, beta_);
            growth_ /= std::abs(res.denominator);
        }
        replay(ws_.rotations, rhs_);
        rhs_.erase(rhs_.begin());
        window_z_.pop_front_row();
        window_y_.pop_front();
        if (!finite(beta_)) throw NumericalBreakdown(NumericalBreakdown::Kind::non_finite, "non-finite weights");
        if (opts_.growth_limit > 0.0 && growth_ > opts_.growth_limit) {
            refactor_window();
            ++refresh_count_;
        }
    } catch (const NumericalBreakdown&) {
        if (window_z_.rows() == m) {
            window_z_.pop_front_row();
            window_y_.pop_front();
        }
        cold_restart();
    }
    return res;
}

StepOutput AboFilter::step(std::span<const double> z, double y) {
    StepOutput out;
    restarted_in_step_ = false;
    out.prediction = predict(z);
    out.test_residual = y - out.prediction;
    update(z, y);
    downdate();
    ++step_count_;
    out.restarted = restarted_in_step_;
    if (opts_.diagnostics) {
        out.train_residual_mean = train_residual_mean();
        const auto c = condition();
        out.condition_number = c.kappa;
        out.rank_deficient = c.rank_deficient();
    }
    return out;
}

linalg::ConditionInfo AboFilter::condition() const { return linalg::effective_condition(factors_.r, opts_.tol.rank); }

double AboFilter::condition_number() const { return condition().kappa; }

double AboFilter::train_residual_mean() const {
    const std::size_t m = window_z_.rows();
    if (m == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += std::abs(window_y_[i] - simd::dot(window_z_.row(i), beta_));
    return acc / static_cast<double>(m);
}

nlohmann::json AboFilter::checkpoint() const {
    nlohmann::json j;
    j["format"] = "abo-filter-checkpoint/1";
    j["window_len"] = window_len_;
    j["feature_dim"] = feature_dim_;
    j["lambda"] = opts_.lambda;
    j["tolerances"] = {{"rank", opts_.tol.rank}, {"range", opts_.tol.range}, {"denom", opts_.tol.denom}};
    j["diagnostics"] = opts_.diagnostics;
    j["growth_limit"] = opts_.growth_limit;
    j["error_growth"] = growth_;
    j["refresh_count"] = refresh_count_;
    j["initialized"] = initialized_;
    j["step_count"] = step_count_;
    j["restart_count"] = restart_count_;
    j["q"] = matrix_to_json(factors_.q);
    j["r"] = matrix_to_json(factors_.r);
    j["r_pinv"] = matrix_to_json(factors_.r_pinv());
    j["beta"] = beta_;
    j["transformed_rhs"] = rhs_;
    j["window_z"] = matrix_to_json(window_z_);
    j["window_y"] = window_y();
    return j;
}

AboFilter AboFilter::restore(const nlohmann::json& j) {
    if (j.value("format", "") != "abo-filter-checkpoint/1") throw std::invalid_argument("not a filter checkpoint");
    FilterOptions opts;
    opts.lambda = j.at("lambda").get<double>();
    const auto& t = j.at("tolerances");
    opts.tol = {t.at("rank").get<double>(), t.at("range").get<double>(), t.at("denom").get<double>()};
    opts.diagnostics = j.at("diagnostics").get<bool>();
    opts.growth_limit = j.at("growth_limit").get<double>();
    AboFilter f(j.at("window_len").get<std::size_t>(), j.at("feature_dim").get<std::size_t>(), opts);
    f.initialized_ = j.at("initialized").get<bool>();
    f.step_count_ = j.at("step_count").get<std::uint64_t>();
    f.restart_count_ = j.at("restart_count").get<std::uint64_t>();
    f.refresh_count_ = j.at("refresh_count").get<std::uint64_t>();
    f.growth_ = j.at("error_growth").get<double>();
    f.factors_.q = matrix_from_json(j.at("q"));
    f.factors_.r = matrix_from_json(j.at("r"));
    f.factors_.r_pinv_t = matrix_from_json(j.at("r_pinv")).transpose();
    f.beta_ = j.at("beta").get<Vector>();
    f.rhs_ = j.at("transformed_rhs").get<Vector>();
    f.window_z_ = matrix_from_json(j.at("window_z"));
    const auto wy = j.at("window_y").get<Vector>();
    f.window_y_.assign(wy.begin(), wy.end());
    if (f.beta_.size() != f.feature_dim_ || f.window_z_.cols() != f.feature_dim_ ||
        f.window_y_.size() != f.window_z_.rows() || f.rhs_.size() != f.factors_.rows()) {
        throw std::invalid_argument("checkpoint: inconsistent shapes");
    }
    return f;
}

}  // namespace abo
