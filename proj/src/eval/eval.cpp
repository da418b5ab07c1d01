#include "abo/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <mutex>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "abo/errors.hpp"

#ifndef ABO_VERSION
#define ABO_VERSION "dev"
#endif

namespace abo::eval {

using Clock = std::chrono::steady_clock;

void ResidualStats::push(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
}

ResidualStats ResidualStats::of(std::span<const double> xs) {
    ResidualStats s;
    for (double x : xs) s.push(x);
    return s;
}

double median(std::vector<double> xs) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    // NaN sorts last so a diverged run has an infinite-like median.
    for (auto& x : xs)
        if (std::isnan(x)) x = std::numeric_limits<double>::infinity();
    const std::size_t mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
    const double hi = xs[mid];
    if (xs.size() % 2 == 1) return hi;
    const double lo = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

std::vector<data::LaggedSample> synthetic_stream(std::size_t n, std::uint64_t seed, std::size_t lags,
                                                 std::size_t burn_in) {
    return data::lag_embed(data::standardize_series(data::gen_nonlinear_ar(n, seed), burn_in), lags);
}

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

RunResult prequential_run(Forecaster& model, std::span<const data::LaggedSample> stream, const RunOptions& opts,
                          std::size_t max_steps) {
    const std::size_t warm = model.warmup();
    if (stream.size() <= warm)
        throw DataError("prequential_run: stream of " + std::to_string(stream.size()) + " samples, need more than " +
                        std::to_string(warm));
    model.init(stream.subspan(0, warm));
    const std::size_t steps = std::min(stream.size() - warm, max_steps);

    RunResult r;
    std::vector<double> abs_res, signed_res, devs;
    abs_res.reserve(steps);
    signed_res.reserve(steps);
    double step_ms = 0.0;
    for (std::size_t i = 0; i < steps; ++i) {
        const auto t0 = Clock::now();
        const StepOutput out = model.step(stream[warm + i]);
        step_ms += ms_since(t0);

        StepRecord rec;
        rec.test_residual = std::abs(out.test_residual);
        rec.train_residual = out.train_residual_mean;
        rec.condition = out.condition_number;
        r.test.push(rec.test_residual);
        r.train.push(rec.train_residual);
        if (std::isfinite(rec.condition) && rec.condition > 0.0) r.cond.push(rec.condition);
        if (out.rank_deficient) ++r.rank_deficient_steps;
        abs_res.push_back(rec.test_residual);
        signed_res.push_back(out.test_residual);
        if (opts.oracle) {
            if (const auto d = model.oracle_deviation()) {
                rec.oracle_dev = *d;
                devs.push_back(*d);
            }
        }
        if (opts.symmetry) {
            if (const auto s = model.symmetry_drift())
                if (!(*s <= r.symmetry_drift_max) || std::isnan(r.symmetry_drift_max)) r.symmetry_drift_max = *s;
        }
        if (opts.keep_trace) r.trace.push_back(rec);
    }
    r.steps = steps;
    r.wall_ms = step_ms;
    r.test_median = median(abs_res);
    double sq = 0.0;
    for (double e : signed_res) sq += e * e;
    r.test_mse = steps ? sq / static_cast<double>(steps) : 0.0;
    r.test_res_var = ResidualStats::of(signed_res).variance();
    if (!devs.empty()) {
        r.oracle_dev_max = 0.0;
        for (double d : devs)
            if (!(d <= r.oracle_dev_max)) r.oracle_dev_max = d;
        r.oracle_dev_median = median(devs);
    }
    r.restarts = model.restarts();
    r.refreshes = model.refreshes();
    r.diverged_at = model.diverged_at();
    return r;
}

// ---------------------------------------------------------------- sweeps

std::vector<std::size_t> SweepConfig::resolved_dims() const {
    std::vector<std::size_t> d = dims;
    if (d.empty()) {
        for (int p = 1; p <= 14; ++p) d.push_back(std::size_t{1} << p);
        d.push_back(window);
    }
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    if (d.front() == 0) throw std::invalid_argument("sweep: dimensions must be positive");
    return d;
}

nlohmann::json SweepConfig::to_json() const {
    return {{"dims", resolved_dims()}, {"window", window},         {"lambda", lambda},   {"steps", steps},
            {"n", series_len},         {"lags", lags},             {"bandwidth", bandwidth},
            {"seed", seed},            {"model", model_name(model)}, {"oracle", oracle}, {"workers", workers}};
}

SweepConfig SweepConfig::from_json(const nlohmann::json& j, SweepConfig c) {
    if (j.contains("dims")) c.dims = j.at("dims").get<std::vector<std::size_t>>();
    if (j.contains("window")) c.window = j.at("window").get<std::size_t>();
    if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
    if (j.contains("steps")) c.steps = j.at("steps").get<std::size_t>();
    if (j.contains("n")) c.series_len = j.at("n").get<std::size_t>();
    if (j.contains("lags")) c.lags = j.at("lags").get<std::size_t>();
    if (j.contains("bandwidth")) c.bandwidth = j.at("bandwidth").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("model")) c.model = parse_model(j.at("model").get<std::string>());
    if (j.contains("oracle")) c.oracle = j.at("oracle").get<bool>();
    if (j.contains("workers")) c.workers = j.at("workers").get<unsigned>();
    return c;
}

namespace {

ModelConfig model_for(const SweepConfig& cfg, std::size_t dim) {
    ModelConfig m;
    m.kind = cfg.model;
    m.window = cfg.window;
    m.feature_dim = dim;
    m.lags = cfg.lags;
    m.lambda = cfg.lambda;
    m.bandwidth = cfg.bandwidth;
    m.seed = cfg.seed;
    return m;
}

std::vector<data::LaggedSample> sweep_stream(const SweepConfig& cfg) {
    auto s = synthetic_stream(cfg.series_len, cfg.seed, cfg.lags);
    if (s.size() < cfg.window + cfg.steps)
        throw DataError("sweep: series of length " + std::to_string(cfg.series_len) + " yields " +
                        std::to_string(s.size()) + " samples; window + steps needs " +
                        std::to_string(cfg.window + cfg.steps));
    s.resize(cfg.window + cfg.steps);
    return s;
}

}  // namespace

SweepRow sweep_row(const SweepConfig& cfg, std::size_t dim, std::span<const data::LaggedSample> stream) {
    auto model = make_forecaster(model_for(cfg, dim));
    RunOptions opts;
    opts.oracle = cfg.oracle;
    opts.symmetry = cfg.model == ModelKind::cov_rls;
    const RunResult r = prequential_run(*model, stream, opts, cfg.steps);

    SweepRow row;
    row.dim = dim;
    row.label = dim == cfg.window ? "I*" : std::to_string(dim);
    row.log2_dim = std::log2(static_cast<double>(dim));
    row.train = r.train;
    row.test = r.test;
    row.cond = r.cond;
    row.test_median = r.test_median;
    const bool infinite = dim == cfg.window || r.rank_deficient_steps > 0;
    row.cond_reported = infinite ? std::numeric_limits<double>::infinity() : r.cond.mean;
    if (r.cond.count == 0 && !infinite) row.cond_reported = std::numeric_limits<double>::quiet_NaN();
    row.wall_ms = r.wall_ms;
    row.oracle_dev_max = r.oracle_dev_max;
    row.oracle_dev_median = r.oracle_dev_median;
    row.symmetry_drift_max = r.symmetry_drift_max;
    row.restarts = r.restarts;
    row.refreshes = r.refreshes;
    row.diverged_at = r.diverged_at;
    return row;
}

std::vector<SweepRow> sweep_dimensions(const SweepConfig& cfg) {
    const auto dims = cfg.resolved_dims();
    const auto stream = sweep_stream(cfg);
    std::vector<SweepRow> rows(dims.size());
    // Largest dimensions first keeps the lanes balanced.
    parallel_for(dims.size(), cfg.workers, [&](std::size_t i) {
        const std::size_t k = dims.size() - 1 - i;
        rows[k] = sweep_row(cfg, dims[k], stream);
    });
    return rows;
}

namespace {

std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(10) << x;
    return os.str();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    return f;
}

}  // namespace

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    auto f = open_out(path);
    f << "label,dim,log2_dim,train_mean,train_var,test_mean,test_var,test_median,cond_mean,cond_var,"
         "cond_measured_mean,wall_ms,oracle_dev_max,oracle_dev_median,symmetry_drift_max,restarts,refreshes,"
         "diverged_at,steps\n";
    for (const auto& r : rows) {
        const bool inf_cond = std::isinf(r.cond_reported);
        f << r.label << ',' << r.dim << ',' << fmt(r.log2_dim) << ',' << fmt(r.train.mean) << ','
          << fmt(r.train.variance()) << ',' << fmt(r.test.mean) << ',' << fmt(r.test.variance()) << ','
          << fmt(r.test_median) << ',' << fmt(r.cond_reported) << ','
          << (inf_cond ? "nan" : fmt(r.cond.variance())) << ',' << fmt(r.cond.mean) << ',' << fmt(r.wall_ms)
          << ',' << fmt(r.oracle_dev_max) << ',' << fmt(r.oracle_dev_median) << ',' << fmt(r.symmetry_drift_max)
          << ',' << r.restarts << ',' << r.refreshes << ',' << r.diverged_at << ',' << r.test.count << '\n';
    }
}

// ---------------------------------------------------------------- bench

std::vector<BenchRow> bench_runtime(const SweepConfig& cfg, std::size_t repetitions, std::size_t steps) {
    if (repetitions == 0 || steps == 0) throw std::invalid_argument("bench: repetitions and steps must be positive");
    SweepConfig c = cfg;
    c.steps = std::max(c.steps, steps);
    const auto stream = sweep_stream(c);
    std::vector<BenchRow> rows;
    for (std::size_t dim : cfg.resolved_dims()) {
        ModelConfig m = model_for(cfg, dim);
        m.diagnostics = false;
        BenchRow row;
        row.dim = dim;
        for (std::size_t rep = 0; rep < repetitions; ++rep) {
            auto model = make_forecaster(m);
            model->init(std::span(stream).subspan(0, model->warmup()));
            const auto t0 = Clock::now();
            for (std::size_t i = 0; i < steps; ++i) model->step(stream[model->warmup() + i]);
            row.wall_ms.push_back(ms_since(t0));
        }
        const auto st = ResidualStats::of(row.wall_ms);
        row.mean_ms = st.mean;
        row.sd_ms = std::sqrt(st.variance());
        row.cv_percent = st.mean > 0 ? 100.0 * row.sd_ms / st.mean : 0.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows) {
    auto f = open_out(path);
    f << "dim,log2_dim,repetitions,mean_ms,sd_ms,cv_percent,ratio_to_previous\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const double ratio = i == 0 ? std::numeric_limits<double>::quiet_NaN() : r.mean_ms / rows[i - 1].mean_ms;
        f << r.dim << ',' << fmt(std::log2(static_cast<double>(r.dim))) << ',' << r.wall_ms.size() << ','
          << fmt(r.mean_ms) << ',' << fmt(r.sd_ms) << ',' << fmt(r.cv_percent) << ',' << fmt(ratio) << '\n';
    }
}

std::vector<double> oracle_trace(const SweepConfig& cfg) {
    if (cfg.model != ModelKind::abo && cfg.model != ModelKind::cov_rls)
        throw std::invalid_argument("oracle_trace: needs a feature-space model (abo or cov_rls)");
    const auto dims = cfg.resolved_dims();
    const auto stream = sweep_stream(cfg);
    auto model = make_forecaster(model_for(cfg, cfg.dims.empty() ? dims.front() : cfg.dims.front()));
    RunOptions opts;
    opts.oracle = true;
    opts.keep_trace = true;
    const auto r = prequential_run(*model, stream, opts, cfg.steps);
    std::vector<double> out;
    out.reserve(r.trace.size());
    for (const auto& rec : r.trace) out.push_back(rec.oracle_dev);
    return out;
}

// ---------------------------------------------------------------- walk-forward

std::size_t FoldSpec::required_length() const {
    const std::size_t sv = stride ? stride : val_len;
    const std::size_t st = stride ? stride : test_len;
    std::size_t len = warmup;
    if (n_val_folds) len += (n_val_folds - 1) * sv + val_len;
    if (n_test_folds) len += (n_test_folds - 1) * st + test_len;
    return len;
}

std::vector<Fold> fold_layout(const FoldSpec& spec, std::size_t stream_len) {
    if (spec.val_len == 0 || spec.test_len == 0) throw std::invalid_argument("folds: segment lengths must be positive");
    if (spec.n_test_folds == 0) throw std::invalid_argument("folds: need at least one test fold");
    if (spec.stride && spec.stride < spec.test_len)
        throw std::invalid_argument("folds: stride shorter than the test segment would overlap test folds");
    const std::size_t need = spec.required_length();
    if (stream_len < need)
        throw DataError("walk-forward needs " + std::to_string(need) + " lagged samples (warm-up " +
                        std::to_string(spec.warmup) + ", " + std::to_string(spec.n_val_folds) + " x " +
                        std::to_string(spec.val_len) + " validation, " + std::to_string(spec.n_test_folds) + " x " +
                        std::to_string(spec.test_len) + " test); the series provides " + std::to_string(stream_len));
    std::vector<Fold> folds;
    const std::size_t sv = spec.stride ? spec.stride : spec.val_len;
    const std::size_t st = spec.stride ? spec.stride : spec.test_len;
    std::size_t pos = spec.warmup;
    std::size_t val_end = spec.warmup;
    for (std::size_t i = 0; i < spec.n_val_folds; ++i) {
        folds.push_back({FoldKind::validation, i, pos, pos + spec.val_len});
        val_end = pos + spec.val_len;
        pos += sv;
    }
    pos = val_end;
    for (std::size_t i = 0; i < spec.n_test_folds; ++i) {
        folds.push_back({FoldKind::test, i, pos, pos + spec.test_len});
        pos += st;
    }
    return folds;
}

std::vector<GridPoint> default_grid(ModelKind kind, std::size_t sigma_points) {
    static constexpr std::size_t windows[] = {21, 51, 101, 201, 421, 761};
    std::vector<double> sigmas;
    if (kind == ModelKind::qrd_rls || sigma_points <= 1) {
        sigmas.push_back(1.0);
    } else {
        const double lo = std::log(0.1), hi = std::log(16.0);
        for (std::size_t i = 0; i < sigma_points; ++i)
            sigmas.push_back(std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(sigma_points - 1)));
    }
    std::vector<GridPoint> g;
    for (std::size_t w : windows)
        for (double s : sigmas) g.push_back({w, s});
    return g;
}

namespace {

FoldMetrics run_fold(std::span<const data::LaggedSample> stream, const Fold& fold, const ModelConfig& cfg) {
    auto model = make_forecaster(cfg);
    const std::size_t warm = model->warmup();
    if (fold.begin < warm) throw std::invalid_argument("walk-forward: fold warm-up exceeds the reserved prefix");
    const auto seg = stream.subspan(fold.begin - warm, warm + (fold.end - fold.begin));
    const auto r = prequential_run(*model, seg);
    return {fold, r.test_mse, r.test_res_var, r.test.mean};
}

}  // namespace

WalkForwardResult walk_forward(std::span<const data::LaggedSample> stream, const FoldSpec& spec,
                               const ModelConfig& base, const std::vector<GridPoint>& grid, unsigned workers) {
    if (grid.empty()) throw std::invalid_argument("walk-forward: empty grid");
    for (const auto& g : grid)
        if (g.window > spec.warmup)
            throw std::invalid_argument("walk-forward: grid window " + std::to_string(g.window) +
                                        " exceeds the fold warm-up " + std::to_string(spec.warmup));
    const auto folds = fold_layout(spec, stream.size());
    std::vector<Fold> val, test;
    for (const auto& f : folds) (f.kind == FoldKind::validation ? val : test).push_back(f);

    auto config_of = [&](const GridPoint& g) {
        ModelConfig c = base;
        c.window = g.window;
        c.bandwidth = g.bandwidth;
        c.diagnostics = false;
        return c;
    };

    WalkForwardResult res;
    res.base = base;
    // Validation jobs: one per (grid point, fold).
    std::vector<FoldMetrics> flat(grid.size() * val.size());
    parallel_for(flat.size(), workers, [&](std::size_t job) {
        const std::size_t gi = job / val.size(), fi = job % val.size();
        flat[job] = run_fold(stream, val[fi], config_of(grid[gi]));
    });
    std::size_t best = 0;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        GridScore s{grid[gi], 0.0};
        for (std::size_t fi = 0; fi < val.size(); ++fi) s.mean_val_mse += flat[gi * val.size() + fi].res_mse;
        if (!val.empty()) s.mean_val_mse /= static_cast<double>(val.size());
        // NaN never wins.
        if (gi == 0 || s.mean_val_mse < res.scores[best].mean_val_mse || std::isnan(res.scores[best].mean_val_mse))
            best = gi;
        res.scores.push_back(s);
    }
    res.selected = grid[best];
    for (std::size_t fi = 0; fi < val.size(); ++fi) res.validation.push_back(flat[best * val.size() + fi]);
    res.test.resize(test.size());
    parallel_for(test.size(), workers,
                 [&](std::size_t i) { res.test[i] = run_fold(stream, test[i], config_of(res.selected)); });
    for (const auto& m : res.test) {
        res.test_mse_mean += m.res_mse;
        res.test_var_mean += m.res_var;
    }
    res.test_mse_mean /= static_cast<double>(res.test.size());
    res.test_var_mean /= static_cast<double>(res.test.size());
    return res;
}

void write_folds_csv(const std::string& path, const WalkForwardResult& r) {
    auto f = open_out(path);
    f << "model,kind,fold,begin,end,window,bandwidth,res_mse,res_var,test_mean\n";
    auto line = [&](const FoldMetrics& m) {
        f << model_name(r.base.kind) << ',' << (m.fold.kind == FoldKind::validation ? "validation" : "test") << ','
          << m.fold.index << ',' << m.fold.begin << ',' << m.fold.end << ',' << r.selected.window << ','
          << fmt(r.selected.bandwidth) << ',' << fmt(m.res_mse) << ',' << fmt(m.res_var) << ',' << fmt(m.test_mean)
          << '\n';
    };
    for (const auto& m : r.validation) line(m);
    for (const auto& m : r.test) line(m);
    f << model_name(r.base.kind) << ",test_average,,,," << r.selected.window << ',' << fmt(r.selected.bandwidth) << ','
      << fmt(r.test_mse_mean) << ',' << fmt(r.test_var_mean) << ",\n";
}

// ---------------------------------------------------------------- manifest

std::string version() { return ABO_VERSION; }

nlohmann::json RunManifest::to_json() const {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return {{"command", command},
            {"config", config},
            {"outputs", outputs},
            {"timestamp", stamp},
            {"version", version()},
            {"clock", "std::chrono::steady_clock (wall, monotonic)"}};
}

void RunManifest::write(const std::string& path) const {
    auto f = open_out(path);
    f << to_json().dump(2) << '\n';
}

}  // namespace abo::eval
