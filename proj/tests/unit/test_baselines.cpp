#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "abo/baselines.hpp"
#include "abo/data.hpp"
#include "abo/filter.hpp"
#include "abo/rff.hpp"
#include "abo/rng.hpp"

using namespace abo;
using linalg::batch_weighted_minnorm;
using linalg::max_abs_diff;

namespace {

struct Stream {
    std::vector<Vector> z;
    std::vector<double> y;
};

Stream synthetic_stream(std::size_t feature_dim, std::size_t count, std::uint64_t seed = 1) {
    const auto series = data::standardize_series(data::gen_nonlinear_ar(count + 200, seed), 100);
    const auto samples = data::lag_embed(series, 7);
    const auto map = rff::sample_feature_map(7, feature_dim, 1.0, derive_seed(seed, feature_dim));
    Stream s;
    for (std::size_t i = 0; i < count; ++i) {
        s.z.push_back(map.embed(samples[i].x));
        s.y.push_back(samples[i].y);
    }
    return s;
}

DenseMatrix rows_of(const std::vector<Vector>& z, std::size_t begin, std::size_t end) {
    DenseMatrix m(0, z[0].size());
    for (std::size_t i = begin; i < end; ++i) m.push_row(z[i]);
    return m;
}

Vector ls_solve(const std::deque<Vector>& xs, const std::deque<double>& ys) {
    Eigen::MatrixXd a(xs.size(), xs[0].size());
    Eigen::VectorXd b(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t j = 0; j < xs[i].size(); ++j) a(i, j) = xs[i][j];
        b(i) = ys[i];
    }
    const Eigen::VectorXd w = a.colPivHouseholderQr().solve(b);
    return {w.data(), w.data() + w.size()};
}

}  // namespace

TEST_CASE("cov_rls: orthonormal stream follows the batch inverse") {
    const std::vector<Vector> e{{1, 0}, {0, 1}};
    CovRls m(2, 2);
    m.init(rows_of(e, 0, 2), std::vector<double>{1.0, 2.0});
    CHECK(max_abs_diff(m.beta(), Vector{1.0, 2.0}) == 0.0);
    std::vector<double> ys{3.0, -1.0};
    for (std::size_t t = 0; t < 2; ++t) {
        m.step(e[t % 2], ys[t]);
        const auto ref = batch_weighted_minnorm(m.window_z(), m.window_y(), 1.0);
        CHECK(max_abs_diff(ref, m.beta()) <= 1e-15);
        CHECK(max_abs_diff(m.gram_pinv(), DenseMatrix::identity(2)) <= 1e-15);
    }
}

TEST_CASE("cov_rls: appending and removing the same row is an inverse pair") {
    for (std::size_t d : {2, 5, 8}) {
        for (std::size_t n : {3, 12}) {
            const auto s = synthetic_stream(d, n + 1, 3);
            CovRls m(n, d);
            m.init(rows_of(s.z, 0, n), std::span(s.y).subspan(0, n));
            const DenseMatrix before = m.gram_pinv();
            // The oldest row enters again and then leaves.
            m.step(s.z[0], s.y[0]);
            CHECK(max_abs_diff(before, m.gram_pinv()) <= 1e-6 * std::max(1.0, linalg::max_abs(before)));
        }
    }
}

namespace {

struct PairedDeviation {
    double cov = 0.0;
    double abo = 0.0;
    double pair = 0.0;
};

PairedDeviation paired_run(std::size_t d, std::size_t n, std::size_t steps) {
    const auto s = synthetic_stream(d, n + steps);
    CovRls cov(n, d);
    AboFilter abo(n, d);
    cov.init(rows_of(s.z, 0, n), std::span(s.y).subspan(0, n));
    abo.init(rows_of(s.z, 0, n), std::span(s.y).subspan(0, n));
    PairedDeviation w;
    for (std::size_t t = n; t < n + steps; ++t) {
        cov.step(s.z[t], s.y[t]);
        abo.step(s.z[t], s.y[t]);
        const auto ref = batch_weighted_minnorm(cov.window_z(), cov.window_y(), 1.0);
        w.cov = std::max(w.cov, max_abs_diff(ref, cov.beta()));
        w.abo = std::max(w.abo, max_abs_diff(ref, abo.beta()));
        w.pair = std::max(w.pair, max_abs_diff(abo.beta(), cov.beta()));
    }
    return w;
}

}  // namespace

TEST_CASE("cov_rls agrees with the filter and the oracle while D < N") {
    for (std::size_t d : {2, 8, 16}) {
        const auto w = paired_run(d, 20, 100);
        INFO("D = " << d);
        CHECK(w.cov <= 1e-8);
        CHECK(w.pair <= 1e-8);
    }
}

TEST_CASE("cov_rls drifts away from the oracle once D > N") {
    // Errors in the pseudoinverse are amplified by the 1/|u|^2 terms of the
    // rank-increasing update; the QR filter stays on the oracle.
    const auto w = paired_run(32, 20, 100);
    CHECK(w.abo <= 1e-8);
    CHECK(w.cov > 1e3 * w.abo);
}

TEST_CASE("cov_rls with forgetting matches the weighted oracle") {
    // 30 steps below the threshold, a handful above it before drift sets in.
    for (auto [d, steps] : {std::pair<std::size_t, std::size_t>{6, 30}, {40, 5}}) {
        const std::size_t n = 10;
        const auto s = synthetic_stream(d, n + steps, 2);
        CovRls cov(n, d, 0.9);
        cov.init(rows_of(s.z, 0, n), std::span(s.y).subspan(0, n));
        for (std::size_t t = n; t < n + steps; ++t) {
            cov.step(s.z[t], s.y[t]);
            const auto ref = batch_weighted_minnorm(cov.window_z(), cov.window_y(), 0.9);
            CHECK(max_abs_diff(ref, cov.beta()) <= 1e-8);
        }
        CHECK(cov.diverged_at() == -1);
        CHECK(cov.symmetry_drift() <= 1e-8);
    }
}

TEST_CASE("cov_rls records divergence instead of restarting") {
    // A non-finite feature poisons the state for good.
    CovRls m(1, 1);
    m.init(rows_of(std::vector<Vector>{{1.0}}, 0, 1), std::vector<double>{1.0});
    m.step(std::vector<double>{0.5}, 0.5);
    CHECK(m.diverged_at() == -1);
    m.step(std::vector<double>{std::numeric_limits<double>::quiet_NaN()}, 1.0);
    CHECK(m.diverged_at() == 2);
    m.step(std::vector<double>{0.5}, 0.5);
    CHECK(m.step_count() == 3);
}

TEST_CASE("qrd_rls: noiseless linear target") {
    const std::size_t lags = 4;
    const Vector w{0.5, -1.0, 0.25, 2.0};
    std::mt19937_64 gen(7);
    std::normal_distribution<double> nd;
    QrdRls m(lags, 50);
    double last = 1.0;
    for (int t = 0; t < 400; ++t) {
        Vector x(lags);
        for (auto& v : x) v = nd(gen);
        double y = 0.0;
        for (std::size_t i = 0; i < lags; ++i) y += w[i] * x[i];
        last = std::abs(m.step(x, y).test_residual);
    }
    // Ridge 1e-2 against ~50 unit-variance rows: a bias of order 1e-3.
    CHECK(max_abs_diff(m.weights(), w) <= 5e-3);
    CHECK(last <= 2e-2);
    CHECK(m.failed_downdates() == 0);
}

TEST_CASE("qrd_rls: window equal to the lag count interpolates") {
    const std::size_t lags = 5;
    std::mt19937_64 gen(11);
    std::normal_distribution<double> nd;
    // Exact only in the vanishing-ridge limit.
    QrdRls m(lags, lags, 1e-12);
    StepOutput out;
    for (int t = 0; t < 60; ++t) {
        Vector x(lags);
        for (auto& v : x) v = nd(gen);
        out = m.step(x, nd(gen));
    }
    CHECK(out.train_residual_mean <= 1e-6);
}

TEST_CASE("qrd_rls with a tiny ridge is sliding-window least squares") {
    const std::size_t lags = 6, window = 30;
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    QrdRls m(lags, window, 1e-14);
    std::deque<Vector> xs;
    std::deque<double> ys;
    for (int t = 0; t < 200; ++t) {
        Vector x(lags);
        for (auto& v : x) v = nd(gen);
        const double y = nd(gen);
        m.step(x, y);
        xs.push_back(x);
        ys.push_back(y);
        if (xs.size() > window) {
            xs.pop_front();
            ys.pop_front();
        }
        if (xs.size() >= lags) CHECK(max_abs_diff(ls_solve(xs, ys), m.weights()) <= 1e-8);
    }
}

TEST_CASE("krls: single point without ridge reproduces its target") {
    Krls m(4, 1.0, 0.0);
    m.init({{0.3, -0.2}}, std::vector<double>{2.5});
    REQUIRE(m.alpha().size() == 1);
    CHECK(m.alpha()[0] == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(m.predict(std::vector<double>{0.3, -0.2}) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("krls: duplicated points give the ridge-shrunk mean") {
    const double delta = 0.1;
    Krls m(3, 0.7, delta);
    const std::vector<Vector> xs(3, Vector{1.0, 1.0});
    const std::vector<double> ys{1.0, 2.0, 6.0};
    m.init(xs, ys);
    CHECK(m.predict(xs[0]) == doctest::Approx(9.0 / (3.0 + delta)).epsilon(1e-12));
}

TEST_CASE("krls: eviction keeps the newest window and order does not matter") {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    std::vector<Vector> xs;
    std::vector<double> ys;
    for (int i = 0; i < 12; ++i) {
        xs.push_back({nd(gen), nd(gen), nd(gen)});
        ys.push_back(nd(gen));
    }
    Krls rolled(8, 1.3);
    rolled.init({xs.begin(), xs.begin() + 4}, std::span(ys).subspan(0, 4));
    for (int i = 4; i < 12; ++i) rolled.step(xs[i], ys[i]);
    CHECK(rolled.dictionary_size() == 8);

    std::vector<std::size_t> perm{4, 5, 6, 7, 8, 9, 10, 11};
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<Vector> px;
    std::vector<double> py;
    for (auto i : perm) {
        px.push_back(xs[i]);
        py.push_back(ys[i]);
    }
    Krls fresh(8, 1.3);
    fresh.init(px, py);
    const Vector probe{0.1, -0.4, 0.9};
    CHECK(fresh.predict(probe) == doctest::Approx(rolled.predict(probe)).epsilon(1e-10));
}
