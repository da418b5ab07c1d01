#include "abo/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "abo/errors.hpp"
#include "abo/eval.hpp"
#include "abo/verify.hpp"

namespace abo::cli {

namespace fs = std::filesystem;

namespace {

// Leading values that only seed the running mean and sd.
constexpr std::size_t kBurnIn = 100;

struct Flags {
    std::size_t n = 10500;
    std::uint64_t seed = 1;
    std::string out;
    std::size_t window = 20;
    double lambda = 1.0;
    std::vector<std::size_t> dims;
    double bandwidth = 1.0;
    std::size_t lags = 7;
    std::string model = "abo";
    std::size_t steps = 10000;
    unsigned workers = 0;
    std::string config;
    bool oracle = false;
    // bench
    std::size_t reps = 10;
    // run
    std::string csv;
    std::string column = "0";
    std::size_t val_len = 250, test_len = 250, val_folds = 8, test_folds = 5, stride = 0;
    std::size_t sigma_points = 8;
    bool raw = false;
    bool window_set = false, bandwidth_set = false;
    // verify
    bool quick = false;
    double tau_rank = 1e-10;
};

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

nlohmann::json load_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream f(path);
    if (!f) throw DataError("cannot read config file " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw DataError("config " + path + ": expected a JSON object");
    return j;
}

eval::SweepConfig sweep_config(const Flags& fl) {
    eval::SweepConfig c;
    c.dims = fl.dims;
    c.window = fl.window;
    c.lambda = fl.lambda;
    c.steps = fl.steps;
    c.series_len = fl.n;
    c.lags = fl.lags;
    c.bandwidth = fl.bandwidth;
    c.seed = fl.seed;
    c.model = eval::parse_model(fl.model);
    c.oracle = fl.oracle;
    c.workers = fl.workers ? fl.workers : default_workers();
    c = eval::SweepConfig::from_json(load_config(fl.config), c);
    if (c.window == 0) throw CLI::ValidationError("--window", "must be positive");
    if (c.steps == 0) throw CLI::ValidationError("--steps", "must be positive");
    if (!(c.lambda > 0.0 && c.lambda <= 1.0)) throw CLI::ValidationError("--lambda", "must be in (0, 1]");
    return c;
}

fs::path out_dir(const Flags& fl, const char* fallback) {
    fs::path p = fl.out.empty() ? fs::path(fallback) : fs::path(fl.out);
    fs::create_directories(p);
    return p;
}

std::string num(double x, int prec = 6) {
    std::ostringstream os;
    os << std::setprecision(prec) << x;
    return os.str();
}

int cmd_synth(const Flags& fl, std::ostream& out) {
    if (fl.n == 0) throw CLI::ValidationError("--n", "must be at least 1");
    if (fl.out.empty()) throw CLI::ValidationError("--out", "output path required");
    auto s = data::gen_nonlinear_ar(fl.n, fl.seed);
    data::write_csv_series(fl.out, s, "x");
    eval::RunManifest m{"synth", {{"n", fl.n}, {"seed", fl.seed}}, {fl.out}};
    m.write(fl.out + ".manifest.json");
    out << "wrote " << fl.n << " values to " << fl.out << '\n';
    return ok;
}

int cmd_sweep(const Flags& fl, std::ostream& out) {
    const auto cfg = sweep_config(fl);
    const fs::path dir = out_dir(fl, "sweep_out");
    const auto rows = eval::sweep_dimensions(cfg);
    const auto csv = (dir / "sweep.csv").string();
    eval::write_sweep_csv(csv, rows);
    eval::RunManifest m{"sweep", cfg.to_json(), {csv}};
    m.write((dir / "manifest.json").string());

    out << std::left << std::setw(7) << "D" << std::setw(14) << "train_mean" << std::setw(14) << "test_mean"
        << std::setw(14) << "test_var" << std::setw(12) << "test_med" << std::setw(12) << "cond_mean"
        << std::setw(10) << "ms" << "restarts/refreshes\n";
    for (const auto& r : rows)
        out << std::setw(7) << r.label << std::setw(14) << num(r.train.mean, 4) << std::setw(14) << num(r.test.mean)
            << std::setw(14) << num(r.test.variance()) << std::setw(12) << num(r.test_median, 4) << std::setw(12)
            << num(r.cond_reported, 5) << std::setw(10) << num(r.wall_ms, 5) << r.restarts << '/' << r.refreshes
            << '\n';
    out << "wrote " << csv << '\n';
    return ok;
}

int cmd_bench(const Flags& fl, std::ostream& out) {
    auto cfg = sweep_config(fl);
    if (fl.dims.empty() && !load_config(fl.config).contains("dims")) {
        cfg.dims.clear();
        for (int p = 1; p <= 14; ++p) cfg.dims.push_back(std::size_t{1} << p);
    }
    cfg.workers = 1;  // timing lane
    const std::size_t steps = std::min<std::size_t>(fl.steps, 1000);
    const fs::path dir = out_dir(fl, "bench_out");
    const auto rows = eval::bench_runtime(cfg, fl.reps, steps);
    const auto csv = (dir / "bench.csv").string();
    eval::write_bench_csv(csv, rows);
    auto j = cfg.to_json();
    j["repetitions"] = fl.reps;
    j["timed_steps"] = steps;
    eval::RunManifest m{"bench", j, {csv}};
    m.write((dir / "manifest.json").string());
    out << "D       mean_ms     sd_ms     cv%    ratio\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        out << std::left << std::setw(8) << r.dim << std::setw(12) << num(r.mean_ms, 5) << std::setw(10)
            << num(r.sd_ms, 3) << std::setw(7) << num(r.cv_percent, 3)
            << (i ? num(r.mean_ms / rows[i - 1].mean_ms, 3) : std::string("-")) << '\n';
    }
    out << "wrote " << csv << '\n';
    return ok;
}

int cmd_run(const Flags& fl, std::ostream& out) {
    if (fl.csv.empty()) throw CLI::ValidationError("--csv", "input file required");
    const auto cfg_json = load_config(fl.config);
    auto series = data::read_csv_series(fl.csv, fl.column);
    if (!fl.raw) {
        if (series.values.size() <= kBurnIn)
            throw DataError(fl.csv + ": " + std::to_string(series.values.size()) + " values, the standardization burn-in alone needs " +
                            std::to_string(kBurnIn + 1));
        series = data::standardize_series(series, kBurnIn);
    }
    const std::size_t lags = cfg_json.value("lags", fl.lags);
    const auto stream = data::lag_embed(series, lags);

    eval::ModelConfig base;
    base.kind = eval::parse_model(cfg_json.value("model", fl.model));
    base.lags = lags;
    base.lambda = cfg_json.value("lambda", fl.lambda);
    base.seed = cfg_json.value("seed", fl.seed);
    base.feature_dim = fl.dims.empty() ? 8192 : fl.dims.front();
    if (cfg_json.contains("dims")) base.feature_dim = cfg_json.at("dims").at(0).get<std::size_t>();

    std::vector<eval::GridPoint> grid;
    if (cfg_json.contains("grid")) {
        for (const auto& g : cfg_json.at("grid")) grid.push_back({g.at("window"), g.at("bandwidth")});
    } else {
        grid = eval::default_grid(base.kind, fl.sigma_points);
        if (fl.window_set) {
            std::erase_if(grid, [&](const auto& g) { return g.window != fl.window; });
            if (grid.empty())
                for (const auto& g : eval::default_grid(base.kind, fl.sigma_points))
                    if (g.window == 21) grid.push_back({fl.window, g.bandwidth});
        }
        if (fl.bandwidth_set) {
            std::vector<eval::GridPoint> g2;
            for (const auto& g : grid)
                if (std::none_of(g2.begin(), g2.end(), [&](const auto& h) { return h.window == g.window; }))
                    g2.push_back({g.window, fl.bandwidth});
            grid = g2;
        }
    }
    std::size_t max_w = 0;
    for (const auto& g : grid) max_w = std::max(max_w, g.window);

    eval::FoldSpec spec;
    spec.warmup = max_w;
    spec.val_len = cfg_json.value("val_len", fl.val_len);
    spec.test_len = cfg_json.value("test_len", fl.test_len);
    spec.n_val_folds = cfg_json.value("val_folds", fl.val_folds);
    spec.n_test_folds = cfg_json.value("test_folds", fl.test_folds);
    spec.stride = cfg_json.value("stride", fl.stride);

    const unsigned workers = fl.workers ? fl.workers : default_workers();
    const auto res = eval::walk_forward(stream, spec, base, grid, workers);

    const fs::path dir = out_dir(fl, "run_out");
    const auto csv = (dir / "folds.csv").string();
    eval::write_folds_csv(csv, res);
    nlohmann::json j{{"csv", fl.csv},
                     {"column", fl.column},
                     {"standardized", !fl.raw},
                     {"model", eval::model_name(base.kind)},
                     {"feature_dim", base.feature_dim},
                     {"lags", lags},
                     {"lambda", base.lambda},
                     {"seed", base.seed},
                     {"folds",
                      {{"warmup", spec.warmup},
                       {"val_len", spec.val_len},
                       {"test_len", spec.test_len},
                       {"val_folds", spec.n_val_folds},
                       {"test_folds", spec.n_test_folds},
                       {"stride", spec.stride}}},
                     {"selected", {{"window", res.selected.window}, {"bandwidth", res.selected.bandwidth}}}};
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& s : res.scores)
        scores.push_back({{"window", s.point.window}, {"bandwidth", s.point.bandwidth}, {"val_mse", s.mean_val_mse}});
    j["grid"] = scores;
    eval::RunManifest m{"run", j, {csv}};
    m.write((dir / "manifest.json").string());

    out << "model " << eval::model_name(base.kind) << " selected W=" << res.selected.window
        << " sigma=" << num(res.selected.bandwidth, 4) << '\n';
    for (const auto& f : res.test)
        out << "test fold " << f.fold.index << " [" << f.fold.begin << ", " << f.fold.end << ") ResMSE "
            << num(f.res_mse) << " ResVAR " << num(f.res_var) << '\n';
    out << "test average ResMSE " << num(res.test_mse_mean) << " ResVAR " << num(res.test_var_mean) << '\n';
    out << "wrote " << csv << '\n';
    return ok;
}

int cmd_verify(const Flags& fl, std::ostream& out) {
    verify::Options o;
    o.quick = fl.quick;
    o.tau_rank = fl.tau_rank;
    o.seed = fl.seed;
    const auto t0 = std::chrono::steady_clock::now();
    const auto checks = verify::run(o, [&](const verify::Check& c) {
        out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << std::endl;
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::size_t failed = 0;
    for (const auto& c : checks) failed += !c.passed;
    out << checks.size() - failed << "/" << checks.size() << " checks passed in " << num(secs, 3) << " s\n";
    return failed ? verification_failed : ok;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Online QR / pseudoinverse RLS with random Fourier features: experiments and checks"};
    app.require_subcommand(1);
    Flags fl;

    auto add_common = [&](CLI::App* sc) {
        sc->add_option("--n", fl.n, "Raw series length (before the 100-point burn-in)");
        sc->add_option("--seed", fl.seed, "Data and feature-map seed");
        sc->add_option("--out", fl.out, "Output file (synth) or directory");
        sc->add_option("--window", fl.window, "Window length N (W for qrd_rls / krls)");
        sc->add_option("--lambda", fl.lambda, "Forgetting factor in (0, 1]");
        sc->add_option("--dims", fl.dims, "Feature dimensions D (comma separated)")->delimiter(',');
        sc->add_option("--bandwidth", fl.bandwidth, "Kernel bandwidth sigma");
        sc->add_option("--lags", fl.lags, "Lag order L");
        sc->add_option("--model", fl.model, "abo | cov_rls | qrd_rls | krls");
        sc->add_option("--steps", fl.steps, "Number of updates");
        sc->add_option("--workers", fl.workers, "Parallel lanes (default: hardware threads)");
        sc->add_option("--config", fl.config, "JSON object overriding the flags");
    };

    auto* synth = app.add_subcommand("synth", "Generate the synthetic nonlinear AR series as CSV");
    add_common(synth);
    auto* sweep = app.add_subcommand("sweep", "Dimension sweep (train/test residuals, condition numbers)");
    add_common(sweep);
    sweep->add_flag("--oracle", fl.oracle, "Record per-step deviation from the batch solution");
    auto* bench = app.add_subcommand("bench", "Runtime per 1000 steps across dimensions");
    add_common(bench);
    bench->add_option("--reps", fl.reps, "Repetitions per dimension");
    auto* runc = app.add_subcommand("run", "Walk-forward evaluation with grid search on a CSV series");
    add_common(runc);
    runc->add_option("--csv", fl.csv, "Input CSV")->required();
    runc->add_option("--column", fl.column, "Column name or zero-based index");
    runc->add_option("--val-len", fl.val_len, "Samples per validation fold");
    runc->add_option("--test-len", fl.test_len, "Samples per test fold");
    runc->add_option("--val-folds", fl.val_folds, "Number of validation folds");
    runc->add_option("--test-folds", fl.test_folds, "Number of test folds");
    runc->add_option("--stride", fl.stride, "Distance between fold starts (0: segment length)");
    runc->add_option("--sigma-points", fl.sigma_points, "Bandwidth grid size on [0.1, 16]");
    runc->add_flag("--raw", fl.raw, "Skip the causal standardization");
    auto* ver = app.add_subcommand("verify", "Run the numerical invariant suite");
    ver->add_option("--seed", fl.seed, "Seed");
    ver->add_flag("--quick", fl.quick, "Reduced suite");
    ver->add_option("--tau-rank", fl.tau_rank, "Rank tolerance (fault injection)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : usage;
    }

    if (runc->parsed()) {
        fl.window_set = runc->count("--window") > 0;
        fl.bandwidth_set = runc->count("--bandwidth") > 0;
        if (runc->count("--lags") == 0) fl.lags = 20;  // real-data default
    }

    try {
        if (synth->parsed()) return cmd_synth(fl, out);
        if (sweep->parsed()) return cmd_sweep(fl, out);
        if (bench->parsed()) return cmd_bench(fl, out);
        if (runc->parsed()) return cmd_run(fl, out);
        if (ver->parsed()) return cmd_verify(fl, out);
    } catch (const CLI::ValidationError& e) {
        err << "usage error: " << e.what() << '\n';
        return usage;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << '\n';
        return usage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return data_error;
    } catch (const NumericalBreakdown& e) {
        err << "numerical failure: " << e.what() << '\n';
        return verification_failed;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return data_error;
    }
    return usage;
}

}  // namespace abo::cli
