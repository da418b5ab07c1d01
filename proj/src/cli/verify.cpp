#include "abo/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "abo/eval.hpp"
#include "abo/filter.hpp"
#include "abo/qr.hpp"
#include "abo/rff.hpp"
#include "abo/rng.hpp"
#include "abo/simd.hpp"

namespace abo::verify {

namespace {

constexpr std::size_t kWindow = 20;

struct FeatureStream {
    DenseMatrix z0;
    Vector y0;
    std::vector<Vector> z;
    Vector y;
};

FeatureStream feature_stream(std::size_t dim, std::size_t steps, std::uint64_t seed) {
    const auto samples = eval::synthetic_stream(kWindow + steps + 120, seed, 7);
    const auto map = rff::sample_feature_map(7, dim, 1.0, derive_seed(seed, dim));
    FeatureStream s;
    s.z0 = DenseMatrix(0, dim);
    for (std::size_t i = 0; i < kWindow; ++i) {
        s.z0.push_row(map.embed(samples[i].x));
        s.y0.push_back(samples[i].y);
    }
    for (std::size_t i = kWindow; i < kWindow + steps; ++i) {
        s.z.push_back(map.embed(samples[i].x));
        s.y.push_back(samples[i].y);
    }
    return s;
}

AboFilter make_filter(const FeatureStream& s, double lambda, double tau_rank) {
    FilterOptions o;
    o.lambda = lambda;
    o.diagnostics = false;
    o.tol.rank = tau_rank;
    AboFilter f(kWindow, s.z0.cols(), o);
    f.init(s.z0, s.y0);
    return f;
}

// R^T R without forming a D x D matrix twice: returns the Gram of the columns.
DenseMatrix gram_of(const DenseMatrix& r) {
    const std::size_t d = r.cols();
    DenseMatrix g(d, d);
    for (std::size_t i = 0; i < r.rows(); ++i) {
        const auto row = r.row(i);
        for (std::size_t a = 0; a < d; ++a)
            if (row[a] != 0.0) simd::axpy(row[a], row, g.row(a));
    }
    return g;
}

std::string sci(double x) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << x;
    return os.str();
}

}  // namespace

double oracle_max_deviation(std::size_t dim, double lambda, std::size_t steps, std::uint64_t seed, double tau_rank) {
    const auto s = feature_stream(dim, steps, seed);
    FilterOptions o;
    o.lambda = lambda;
    o.diagnostics = false;
    o.tol.rank = tau_rank;
    AboFilter f(kWindow, dim, o);
    f.init(s.z0, s.y0);
    double worst = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        f.step(s.z[t], s.y[t]);
        const auto ref = linalg::batch_weighted_minnorm(f.window_z(), f.window_y(), lambda);
        const double d = linalg::max_abs_diff(ref, f.beta());
        if (!(d <= worst)) worst = d;
    }
    return worst;
}

double penrose_fuzz_worst(std::size_t dim, std::size_t steps, std::uint64_t seed, double tau_rank) {
    SplitMix64 rng(derive_seed(seed, 7000 + dim));
    const double lambda = rng.uniform(0.85, 1.0);
    const auto s = feature_stream(dim, steps, seed + dim);
    auto f = make_filter(s, lambda, tau_rank);
    double worst = 0.0;
    auto check = [&] {
        const auto& fac = f.factors();
        const double p = linalg::penrose_residuals(fac.r, fac.r_pinv()).max();
        if (!(p <= worst)) worst = p;
    };
    for (std::size_t t = 0; t < steps; ++t) {
        f.update(s.z[t], s.y[t]);
        check();
        f.downdate();
        check();
    }
    return worst;
}

double gramian_identity_worst(std::size_t dim, double lambda, std::size_t steps, std::uint64_t seed,
                              double tau_rank) {
    const auto s = feature_stream(dim, steps, seed);
    auto f = make_filter(s, lambda, tau_rank);
    const double lam_n = std::pow(lambda, static_cast<double>(kWindow));
    double worst = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        f.update(s.z[t], s.y[t]);
        const DenseMatrix before = gram_of(f.factors().r);
        const Vector z_old(f.window_z().row(0).begin(), f.window_z().row(0).end());
        f.downdate();
        DenseMatrix expect = before;
        for (std::size_t a = 0; a < dim; ++a) simd::axpy(-lam_n * z_old[a], z_old, expect.row(a));
        const double rel = linalg::max_abs_diff(gram_of(f.factors().r), expect) / linalg::max_abs(before);
        if (!(rel <= worst)) worst = rel;
    }
    return worst;
}

std::vector<Check> run(const Options& opts, const std::function<void(const Check&)>& on_check) {
    std::vector<Check> out;
    auto report = [&](std::string name, bool ok, std::string detail) {
        out.push_back({std::move(name), ok, std::move(detail)});
        if (on_check) on_check(out.back());
    };
    const std::size_t steps = opts.quick ? 150 : 500;

    struct OracleCase {
        std::size_t dim;
        double lambda;
        double tol;
    };
    std::vector<OracleCase> cases{{8, 1.0, 1e-8}, {64, 0.9, 1e-6}, {20, 1.0, 1e-6}, {20, 0.9, 1e-6}};
    if (!opts.quick) cases.push_back({1024, 0.9, 1e-6});
    for (const auto& c : cases) {
        const double d = oracle_max_deviation(c.dim, c.lambda, steps, opts.seed, opts.tau_rank);
        std::ostringstream name;
        name << "oracle equivalence D=" << c.dim << " lambda=" << c.lambda;
        report(name.str(), d <= c.tol, "max |beta - beta_batch| = " + sci(d) + " (tol " + sci(c.tol) + ")");
    }

    const std::size_t fuzz_steps = opts.quick ? 100 : 300;
    std::vector<std::size_t> fuzz_dims{4, 20, 64};
    if (!opts.quick) fuzz_dims.push_back(512);
    for (std::size_t d : fuzz_dims) {
        const double p = penrose_fuzz_worst(d, fuzz_steps, opts.seed, opts.tau_rank);
        report("penrose axioms D=" + std::to_string(d), p <= 1e-8, "worst residual = " + sci(p) + " (tol 1e-8)");
    }

    const double g = gramian_identity_worst(64, 0.9, opts.quick ? 200 : 1000, opts.seed, opts.tau_rank);
    report("weighted downdate gramian identity D=64 lambda=0.9", g <= 1e-8, "worst relative = " + sci(g) + " (tol 1e-8)");

    // Scalar and vector kernels drive the same trajectory.
    {
        const auto s = feature_stream(48, 60, opts.seed);
        double diff = 0.0;
        Vector ref;
        for (auto b : {simd::Backend::scalar, simd::active_backend()}) {
            simd::ScopedBackend scope(b);
            auto f = make_filter(s, 0.95, opts.tau_rank);
            for (std::size_t t = 0; t < 60; ++t) f.step(s.z[t], s.y[t]);
            if (ref.empty())
                ref = f.beta();
            else
                diff = linalg::max_abs_diff(ref, f.beta());
        }
        report(std::string("kernel backends agree (scalar vs ") + std::string(simd::backend_name(simd::active_backend())) + ")",
               diff <= 1e-9, "max |beta diff| = " + sci(diff));
    }
    return out;
}

}  // namespace abo::verify
