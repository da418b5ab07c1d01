#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "abo/simd.hpp"

using namespace abo::simd;

namespace {

std::vector<double> randn(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

std::vector<Backend> vector_backends() {
    std::vector<Backend> out;
    for (Backend b : {Backend::avx2, Backend::neon})
        if (backend_supported(b)) out.push_back(b);
    return out;
}

}  // namespace

TEST_CASE("scalar kernels on small fixed inputs") {
    const KernelTable& k = scalar_kernels();
    const double a[] = {1, 2, 3};
    const double b[] = {4, -5, 6};
    CHECK(k.dot(a, b, 3) == 12.0);
    CHECK(k.sumsq(a, 3) == 14.0);
    double y[] = {1, 1, 1};
    k.axpy(2.0, a, y, 3);
    CHECK(y[2] == 7.0);
    k.scale(0.5, y, 3);
    CHECK(y[0] == 1.5);
    double x[] = {3.0};
    double z[] = {4.0};
    k.rot(x, z, 1, 0.6, 0.8);
    CHECK(x[0] == doctest::Approx(5.0));
    CHECK(z[0] == doctest::Approx(0.0));
}

TEST_CASE("vector kernels agree with the scalar reference") {
    std::mt19937_64 rng(11);
    const KernelTable& ref = scalar_kernels();
    for (Backend be : vector_backends()) {
        const KernelTable& k = kernels_for(be);
        CAPTURE(backend_name(be));
        // Lengths straddle every unroll boundary and tail.
        for (std::size_t n : {0, 1, 3, 4, 5, 7, 8, 15, 16, 17, 31, 33, 64, 100, 1023, 16384}) {
            CAPTURE(n);
            const auto a = randn(n, rng);
            const auto b = randn(n, rng);
            const double scale = std::sqrt(static_cast<double>(n) + 1.0);
            CHECK(std::abs(k.dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= 1e-13 * scale * scale);
            CHECK(std::abs(k.sumsq(a.data(), n) - ref.sumsq(a.data(), n)) <= 1e-13 * scale * scale);

            auto y1 = b, y2 = b;
            ref.axpy(-0.37, a.data(), y1.data(), n);
            k.axpy(-0.37, a.data(), y2.data(), n);
            for (std::size_t i = 0; i < n; ++i) REQUIRE(std::abs(y1[i] - y2[i]) <= 1e-15 * (1 + std::abs(y1[i])));

            ref.scale(1.7, y1.data(), n);
            k.scale(1.7, y2.data(), n);
            for (std::size_t i = 0; i < n; ++i) REQUIRE(std::abs(y1[i] - y2[i]) <= 1e-15 * (1 + std::abs(y1[i])));

            auto x1 = a, x2 = a, z1 = b, z2 = b;
            ref.rot(x1.data(), z1.data(), n, 0.8, -0.6);
            k.rot(x2.data(), z2.data(), n, 0.8, -0.6);
            for (std::size_t i = 0; i < n; ++i) {
                REQUIRE(std::abs(x1[i] - x2[i]) <= 1e-14);
                REQUIRE(std::abs(z1[i] - z2[i]) <= 1e-14);
            }
        }
    }
}

TEST_CASE("backend selection and override") {
    CHECK(backend_supported(Backend::scalar));
    CHECK(parse_backend("scalar") == Backend::scalar);
    CHECK_THROWS_AS(parse_backend("sse9"), std::invalid_argument);
    {
        ScopedBackend guard(Backend::scalar);
        CHECK(active_backend() == Backend::scalar);
        const std::vector<double> v{3, 4};
        CHECK(sumsq(v) == 25.0);
    }
    if (!backend_supported(Backend::neon)) CHECK_THROWS_AS(force_backend(Backend::neon), std::invalid_argument);
}
