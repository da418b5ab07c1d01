#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "abo/errors.hpp"
#include "abo/eval.hpp"

using namespace abo;
using namespace abo::eval;

TEST_CASE("residual stats match a two-pass computation") {
    std::mt19937_64 gen(9);
    std::lognormal_distribution<double> ln(0.0, 2.0);
    std::vector<double> xs;
    for (int i = 0; i < 5000; ++i) xs.push_back(1e3 + ln(gen));
    const auto s = ResidualStats::of(xs);
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size() - 1);
    CHECK(s.count == xs.size());
    CHECK(std::abs(s.mean - mean) <= 1e-10 * std::abs(mean));
    CHECK(std::abs(s.variance() - var) <= 1e-10 * var);
    CHECK(ResidualStats::of(std::vector<double>{3.0}).variance() == 0.0);
}

TEST_CASE("median") {
    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 3, 2}) == 2.5);
    CHECK(std::isinf(median({1, NAN, NAN})));
}

TEST_CASE("perfectly predictable stream gives zero test statistics") {
    std::vector<data::LaggedSample> stream;
    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd;
    for (std::size_t t = 0; t < 80; ++t) stream.push_back({{nd(gen), nd(gen), nd(gen)}, 0.0, t + 3});
    for (auto kind : {ModelKind::abo, ModelKind::cov_rls, ModelKind::qrd_rls, ModelKind::krls}) {
        ModelConfig c;
        c.kind = kind;
        c.lags = 3;
        c.feature_dim = 16;
        c.window = 10;
        auto m = make_forecaster(c);
        const auto r = prequential_run(*m, stream);
        CHECK(r.steps == 70);
        CHECK(r.test.mean == 0.0);
        CHECK(r.test.variance() == 0.0);
    }
}

TEST_CASE("oracle traces") {
    SweepConfig c;
    c.steps = 500;
    c.series_len = 700;
    c.dims = {8};
    auto t = oracle_trace(c);
    REQUIRE(t.size() == 500);
    CHECK(*std::max_element(t.begin(), t.end()) <= 1e-8);

    c.dims = {64};
    c.lambda = 0.9;
    t = oracle_trace(c);
    CHECK(*std::max_element(t.begin(), t.end()) <= 1e-6);

    c.model = ModelKind::qrd_rls;
    CHECK_THROWS_AS(oracle_trace(c), std::invalid_argument);
}

TEST_CASE("sweep layout") {
    SweepConfig c;
    const auto dims = c.resolved_dims();
    CHECK(dims.size() == 15);
    CHECK(std::count(dims.begin(), dims.end(), std::size_t{20}) == 1);
    CHECK(dims.back() == 16384);

    c.dims = {64, 4, 20};
    c.steps = 300;
    c.series_len = 500;
    c.oracle = true;
    const auto rows = sweep_dimensions(c);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].dim == 4);
    CHECK(rows[1].label == "I*");
    CHECK(std::isinf(rows[1].cond_reported));
    CHECK(std::isfinite(rows[1].cond.mean));
    CHECK(std::isfinite(rows[0].cond_reported));
    CHECK(rows[2].train.mean <= 1e-8);
    CHECK(rows[2].oracle_dev_max <= 1e-8);
    for (const auto& r : rows) CHECK(r.test.count == 300);

    SUBCASE("parallel lanes reproduce the serial rows") {
        c.workers = 3;
        const auto par = sweep_dimensions(c);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(par[i].test.mean == rows[i].test.mean);
            CHECK(par[i].cond.mean == rows[i].cond.mean);
        }
    }
    SUBCASE("csv") {
        const auto path = std::filesystem::temp_directory_path() / "abo_sweep_test.csv";
        write_sweep_csv(path.string(), rows);
        std::ifstream f(path);
        std::string line;
        int n = 0;
        while (std::getline(f, line)) ++n;
        CHECK(n == 4);
        std::filesystem::remove(path);
    }
}

TEST_CASE("too short a series is reported with the required length") {
    SweepConfig c;
    c.series_len = 200;
    CHECK_THROWS_WITH_AS(sweep_dimensions(c), doctest::Contains("10020"), DataError);
}

TEST_CASE("bench rows") {
    SweepConfig c;
    c.dims = {8, 16};
    c.series_len = 400;
    c.steps = 100;
    const auto rows = bench_runtime(c, 3, 50);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].wall_ms.size() == 3);
    CHECK(rows[1].mean_ms > 0.0);
    CHECK(rows[1].cv_percent >= 0.0);
}

TEST_CASE("fold layout") {
    FoldSpec s;
    s.warmup = 50;
    s.val_len = 30;
    s.test_len = 40;
    const auto folds = fold_layout(s, s.required_length());
    REQUIRE(folds.size() == 13);
    std::set<std::size_t> test_idx;
    std::size_t last_val_end = 0;
    for (const auto& f : folds) {
        CHECK(f.begin >= s.warmup);
        if (f.kind == FoldKind::validation) last_val_end = std::max(last_val_end, f.end);
    }
    for (const auto& f : folds) {
        if (f.kind != FoldKind::test) continue;
        CHECK(f.begin >= last_val_end);
        for (std::size_t i = f.begin; i < f.end; ++i) CHECK(test_idx.insert(i).second);
    }
    CHECK(folds.back().end == s.required_length());
    const std::string need = std::to_string(s.required_length());
    CHECK_THROWS_WITH_AS(fold_layout(s, s.required_length() - 1), doctest::Contains(need.c_str()), DataError);

    SUBCASE("overlapping validation windows") {
        s.stride = 40;
        s.val_len = 60;
        const auto f2 = fold_layout(s, s.required_length());
        CHECK(f2[1].begin < f2[0].end);
        s.stride = 20;  // shorter than a test segment
        CHECK_THROWS_AS(fold_layout(s, 100000), std::invalid_argument);
    }
}

TEST_CASE("grids") {
    CHECK(default_grid(ModelKind::abo).size() == 48);
    CHECK(default_grid(ModelKind::qrd_rls).size() == 6);
    const auto g = default_grid(ModelKind::krls, 8);
    CHECK(g.front().bandwidth == doctest::Approx(0.1));
    CHECK(g[7].bandwidth == doctest::Approx(16.0));
}

TEST_CASE("walk-forward") {
    const auto stream = synthetic_stream(1400, 4, 7);
    FoldSpec s;
    s.warmup = 60;
    s.val_len = 60;
    s.test_len = 80;
    s.n_val_folds = 4;
    s.n_test_folds = 3;
    ModelConfig base;
    base.kind = ModelKind::krls;

    SUBCASE("a grid of one point selects it") {
        const auto r = walk_forward(stream, s, base, {{40, 2.0}});
        CHECK(r.selected.window == 40);
        CHECK(r.selected.bandwidth == 2.0);
        CHECK(r.validation.size() == 4);
        CHECK(r.test.size() == 3);
    }
    SUBCASE("selection minimizes the validation score") {
        const std::vector<GridPoint> grid{{21, 0.1}, {51, 1.0}, {51, 16.0}};
        const auto r = walk_forward(stream, s, base, grid, 2);
        REQUIRE(r.scores.size() == 3);
        for (const auto& sc : r.scores) CHECK(sc.mean_val_mse >= 0.0);
        double best = 1e300;
        for (const auto& sc : r.scores) best = std::min(best, sc.mean_val_mse);
        double chosen = 0.0;
        for (const auto& sc : r.scores)
            if (sc.point.window == r.selected.window && sc.point.bandwidth == r.selected.bandwidth) chosen = sc.mean_val_mse;
        CHECK(chosen == best);
    }
    SUBCASE("grid windows must fit in the warm-up") {
        CHECK_THROWS_AS(walk_forward(stream, s, base, {{61, 1.0}}), std::invalid_argument);
    }
}

TEST_CASE("manifest") {
    RunManifest m{"sweep", {{"seed", 1}}, {"a.csv"}};
    const auto j = m.to_json();
    CHECK(j.at("command") == "sweep");
    CHECK(j.at("config").at("seed") == 1);
    CHECK(j.contains("timestamp"));
    CHECK(j.at("version") == version());
}
