#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "abo/errors.hpp"
#include "abo/givens.hpp"
#include "abo/qr.hpp"
#include "support.hpp"

using namespace abo::linalg;
using abo::testing::append_row;
using abo::testing::drop_first_row;
using abo::testing::random_low_rank;
using abo::testing::random_matrix;
using abo::testing::random_vector;

namespace {

using EMat = Eigen::MatrixXd;

EMat to_eigen(const DenseMatrix& m) {
    EMat e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    return e;
}

// Test-side pseudoinverse: divide-and-conquer SVD, not the library's path.
EMat oracle_pinv(const EMat& a, double rel = 1e-10) {
    if (a.size() == 0) return EMat::Zero(a.cols(), a.rows());
    Eigen::BDCSVD<EMat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > rel * s(0)) inv(i) = 1.0 / s(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Largest over smallest singular value above the rank cutoff.
double effective_cond(const DenseMatrix& m) {
    if (m.empty()) return 1.0;
    Eigen::JacobiSVD<EMat> svd(to_eigen(m));
    const auto& s = svd.singularValues();
    double lo = s(0);
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > 1e-10 * s(0)) lo = s(i);
    return s(0) > 0 ? s(0) / lo : 1.0;
}

double rel_diff(const EMat& a, const EMat& b) {
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

void check_consistent(const QrFactors& f, const DenseMatrix& window, double tol) {
    REQUIRE(f.q.rows() == window.rows());
    CHECK(max_abs_diff(f.q * f.r, window) <= tol * std::max(1.0, max_abs(window)));
    CHECK(orthogonality_error(f.q) <= tol);
    CHECK(trapezoid_violation(f.r) <= 1e-10);
    CHECK(penrose_residuals(f.r, f.r_pinv()).max() <= tol);
}

}  // namespace

TEST_CASE("givens_from") {
    const auto g = givens_from(3, 4);
    CHECK(g.c == doctest::Approx(0.6));
    CHECK(g.s == doctest::Approx(0.8));
    std::vector<double> v{3, 4};
    rotate_entries(v, g);
    CHECK(v[0] == doctest::Approx(5.0));
    CHECK(std::abs(v[1]) < 1e-15);

    const auto id = givens_from(2.5, 0);
    CHECK(id.c == 1.0);
    CHECK(id.s == 0.0);
    const auto zero = givens_from(0, 0);
    CHECK(zero.is_identity());
    CHECK_THROWS_AS(givens_from(1, 1, 2, 2), std::invalid_argument);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    for (int t = 0; t < 1000; ++t) {
        const double x = n01(rng), y = n01(rng);
        const auto r = givens_from(x, y);
        REQUIRE(std::abs(r.c * r.c + r.s * r.s - 1.0) <= 1e-12);
        std::vector<double> xy{x, y};
        rotate_entries(xy, r);
        REQUIRE(xy[0] >= 0.0);
        REQUIRE(std::abs(xy[1]) <= 1e-15 * std::hypot(x, y));
    }
}

TEST_CASE("apply_rotation_left") {
    const auto m = apply_rotation_left(DenseMatrix::identity(2), GivensRotation{0, 1, 0.0, 1.0});
    CHECK(m == DenseMatrix::from_rows({{0, 1}, {-1, 0}}));

    std::mt19937_64 rng(5);
    const auto a = random_matrix(4, 3, rng);
    CHECK(apply_rotation_left(a, GivensRotation{1, 3, 1.0, 0.0}) == a);

    const auto g = givens_from(0.3, -1.7, 1, 3);
    const auto b = apply_rotation_left(a, g);
    CHECK(std::abs(frobenius_norm(b) - frobenius_norm(a)) <= 1e-10 * frobenius_norm(a));
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(b(0, j) == a(0, j));
        CHECK(b(2, j) == a(2, j));
    }
    CHECK_THROWS_AS(apply_rotation_left(a, GivensRotation{0, 4, 1.0, 0.0}), std::out_of_range);
}

TEST_CASE("qr_decompose") {
    SUBCASE("identity") {
        const auto f = qr_decompose(DenseMatrix::identity(3));
        CHECK(max_abs_diff(f.q * f.r, DenseMatrix::identity(3)) <= 1e-15);
        CHECK(max_abs_diff(f.r_pinv(), f.r.transpose()) <= 1e-14);  // diagonal +-1
        CHECK(orthogonality_error(f.q) <= 1e-15);
    }
    SUBCASE("zero matrix") {
        const auto f = qr_decompose(DenseMatrix(2, 2));
        CHECK(max_abs(f.r) == 0.0);
        CHECK(max_abs(f.r_pinv_t) == 0.0);
    }
    SUBCASE("random wide") {
        std::mt19937_64 rng(7);
        const auto z = random_matrix(5, 8, rng);
        const auto f = qr_decompose(z);
        check_consistent(f, z, 1e-8);
        CHECK(rel_diff(to_eigen(f.r_pinv()), oracle_pinv(to_eigen(f.r))) <= 1e-9);
    }
    SUBCASE("non-finite input") {
        auto z = DenseMatrix::identity(2);
        z(0, 1) = std::nan("");
        CHECK_THROWS_AS(qr_decompose(z), std::invalid_argument);
    }
}

TEST_CASE("pinv_append_row examples") {
    UpdateWorkspace ws;
    SUBCASE("zero row is dependent") {
        auto f = qr_decompose(DenseMatrix::from_rows({{1}}));
        const auto res = pinv_append_row(f, std::vector<double>{0.0}, ws);
        CHECK_FALSE(res.rank_increased);
        CHECK(ws.gain_b[0] == 0.0);
        const auto window = DenseMatrix::from_rows({{1}, {0}});
        check_consistent(f, window, 1e-12);
        // pinv of the window [[1],[0]] is [1, 0]
        const DenseMatrix wp = f.r_pinv() * f.q.transpose();
        CHECK(max_abs_diff(wp, DenseMatrix::from_rows({{1, 0}})) <= 1e-15);
    }
    SUBCASE("orthogonal row raises rank") {
        auto f = qr_decompose(DenseMatrix::from_rows({{1, 0}}));
        const auto res = pinv_append_row(f, std::vector<double>{0.0, 1.0}, ws);
        CHECK(res.rank_increased);
        CHECK(ws.c[0] == 0.0);
        CHECK(ws.c[1] == 1.0);
        const DenseMatrix wp = f.r_pinv() * f.q.transpose();
        CHECK(max_abs_diff(wp, DenseMatrix::identity(2)) <= 1e-15);
    }
    SUBCASE("random 3x6 against batch pseudoinverse") {
        std::mt19937_64 rng(9);
        const auto r0 = random_matrix(3, 6, rng);
        auto f = qr_decompose(r0);
        const auto z = random_vector(6, rng);
        pinv_append_row(f, z, ws);
        const auto window = append_row(r0, z);
        check_consistent(f, window, 1e-9);
        CHECK(rel_diff(to_eigen(f.r_pinv()), oracle_pinv(to_eigen(f.r))) <= 1e-9);
    }
    SUBCASE("feature mismatch") {
        auto f = qr_decompose(DenseMatrix::identity(2));
        CHECK_THROWS_AS(pinv_append_row(f, std::vector<double>{1, 2, 3}, ws), std::invalid_argument);
    }
}

TEST_CASE("pinv_remove_row examples") {
    UpdateWorkspace ws;
    SUBCASE("orthogonal rows") {
        auto f = qr_decompose(DenseMatrix::identity(2));
        pinv_remove_row(f, std::vector<double>{1.0, 0.0}, ws);
        const auto rest = DenseMatrix::from_rows({{0, 1}});
        check_consistent(f, rest, 1e-12);
        const DenseMatrix wp = f.r_pinv() * f.q.transpose();
        CHECK(max_abs_diff(wp, DenseMatrix::from_rows({{0}, {1}})) <= 1e-15);
    }
    SUBCASE("append then remove the same row") {
        std::mt19937_64 rng(13);
        for (auto [m, d] : {std::pair{4, 10}, {6, 6}, {8, 3}}) {
            const auto z = random_matrix(m, d, rng);
            const auto f0 = qr_decompose(z);
            auto f = f0;
            const auto row = random_vector(d, rng);
            pinv_append_row(f, row, ws);
            // The appended row is now the newest; removing the oldest gives a
            // different window, so round-trip through a window whose oldest
            // row is the one appended last.
            auto g = qr_decompose(append_row(DenseMatrix(0, d), row));
            for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) pinv_append_row(g, z.row(i), ws);
            pinv_remove_row(g, row, ws);
            // window is now z again
            check_consistent(g, z, 1e-8);
            const DenseMatrix wp0 = f0.r_pinv() * f0.q.transpose();
            const DenseMatrix wp1 = g.r_pinv() * g.q.transpose();
            CHECK(max_abs_diff(wp0, wp1) <= 1e-8 * std::max(1.0, max_abs(wp0)));
        }
    }
    SUBCASE("random 4x10 remove oldest") {
        std::mt19937_64 rng(17);
        const auto z = random_matrix(4, 10, rng);
        auto f = qr_decompose(z);
        const auto res = pinv_remove_row(f, z.row(0), ws);
        CHECK(res.branch == DowndateBranch::projector);
        check_consistent(f, drop_first_row(z), 1e-8);
        CHECK(rel_diff(to_eigen(f.r_pinv()), oracle_pinv(to_eigen(f.r))) <= 1e-8);
    }
    SUBCASE("row outside the row space is rejected") {
        auto f = qr_decompose(DenseMatrix::from_rows({{1, 0, 0}, {0, 1, 0}}));
        try {
            pinv_remove_row(f, std::vector<double>{0.0, 0.0, 1.0}, ws);
            FAIL("expected a breakdown");
        } catch (const abo::NumericalBreakdown& e) {
            CHECK(e.kind() == abo::NumericalBreakdown::Kind::range_condition);
        }
    }
}

TEST_CASE("append and remove agree with batch factorizations on random windows") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> rows_dist(2, 12);
    std::uniform_int_distribution<int> shape(0, 3);
    UpdateWorkspace ws;
    int rational = 0, projector = 0;
    for (int inst = 0; inst < 1000; ++inst) {
        CAPTURE(inst);
        const std::size_t m = rows_dist(rng);
        std::size_t d = 0;
        switch (shape(rng)) {
            case 0: d = m + 1 + rng() % 12; break;  // wide
            case 1: d = m; break;                    // square
            case 2: d = 1 + rng() % (m - 1); break;  // tall
            default: d = 1 + rng() % 16; break;
        }
        const bool deficient = inst % 5 == 0 && std::min(m, d) > 1;
        auto z = deficient ? random_low_rank(m, d, std::min(m, d) - 1, rng) : random_matrix(m, d, rng);
        // Perturbation bounds grow like cond^2; redraw the rare badly
        // conditioned windows so the absolute tolerance stays meaningful.
        while (effective_cond(z) > 1e3 || effective_cond(drop_first_row(z)) > 1e3)
            z = deficient ? random_low_rank(m, d, std::min(m, d) - 1, rng) : random_matrix(m, d, rng);

        // append the last row to a factorization of the others
        DenseMatrix head = drop_first_row(z);
        auto f = qr_decompose(DenseMatrix(0, d));
        for (std::size_t i = 0; i < m; ++i) pinv_append_row(f, z.row(i), ws);
        check_consistent(f, z, 1e-8);
        REQUIRE(rel_diff(to_eigen(f.r_pinv()), oracle_pinv(to_eigen(f.r))) <= 1e-8);

        const auto res = pinv_remove_row(f, z.row(0), ws);
        (res.branch == DowndateBranch::rational ? rational : projector)++;
        check_consistent(f, head, 1e-8);
        REQUIRE(rel_diff(to_eigen(f.r_pinv()), oracle_pinv(to_eigen(f.r))) <= 1e-8);
    }
    CHECK(rational > 100);
    CHECK(projector > 100);
}

TEST_CASE("batch_weighted_minnorm") {
    SUBCASE("identity design") {
        const std::vector<double> y{1, -2, 3, 0.5};
        const auto b = batch_weighted_minnorm(DenseMatrix::identity(4), y, 1.0);
        CHECK(max_abs_diff(b, y) <= 1e-14);
    }
    SUBCASE("duplicated columns share weight") {
        const auto z = DenseMatrix::from_rows({{1, 1}, {2, 2}});
        const std::vector<double> y{2, 4};
        const auto b = batch_weighted_minnorm(z, y, 1.0);
        CHECK(b[0] == doctest::Approx(1.0));
        CHECK(b[1] == doctest::Approx(1.0));
    }
    SUBCASE("interpolates wide systems and agrees with an SVD solve") {
        std::mt19937_64 rng(31);
        const auto z = random_matrix(20, 64, rng);
        const auto y = random_vector(20, rng);
        const auto b = batch_weighted_minnorm(z, y, 0.9);
        const auto fit = matvec(z, b);
        CHECK(max_abs_diff(fit, y) <= 1e-9);

        const auto w = forgetting_weights(20, 0.9);
        EMat a = to_eigen(z);
        Eigen::VectorXd rhs(20);
        for (int i = 0; i < 20; ++i) {
            a.row(i) *= w[i];
            rhs(i) = w[i] * y[i];
        }
        const Eigen::VectorXd ref = oracle_pinv(a) * rhs;
        for (int j = 0; j < 64; ++j) CHECK(std::abs(b[j] - ref(j)) <= 1e-9);
    }
    SUBCASE("weights are newest-heaviest") {
        const auto w = forgetting_weights(3, 0.25);
        CHECK(w[2] == 1.0);
        CHECK(w[1] == 0.5);
        CHECK(w[0] == 0.25);
    }
    CHECK_THROWS_AS(batch_weighted_minnorm(DenseMatrix::identity(2), std::vector<double>{1}, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(batch_weighted_minnorm(DenseMatrix::identity(1), std::vector<double>{1}, 0.0),
                    std::invalid_argument);
}

TEST_CASE("penrose residuals on a very wide factor use the low-rank bound") {
    std::mt19937_64 rng(41);
    const auto z = random_matrix(16, 4096, rng);
    const auto f = qr_decompose(z);
    const auto p = penrose_residuals(f.r, f.r_pinv());
    CHECK(p.max() <= 1e-8);
    // a non-pseudoinverse is flagged
    auto bad = f.r_pinv();
    bad(0, 0) += 1e-3;
    CHECK(penrose_residuals(f.r, bad).max() > 1e-6);
}

TEST_CASE("dense helpers") {
    DenseMatrix m(0, 3);
    m.push_row(std::vector<double>{1, 2, 3});
    m.push_row(std::vector<double>{4, 5, 6});
    m.pop_front_row();
    m.push_row(std::vector<double>{7, 8, 9});
    CHECK(m == DenseMatrix::from_rows({{4, 5, 6}, {7, 8, 9}}));
    CHECK(matvec(m, std::vector<double>{1, 0, 1})[1] == 16.0);
    CHECK(matvec_transposed(m, std::vector<double>{1, 1})[0] == 11.0);
    CHECK(m.transpose()(2, 1) == 9.0);
}
