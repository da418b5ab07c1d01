#pragma once

// Experiment drivers: prequential runs, dimension sweeps, the runtime bench,
// walk-forward folds with grid search, and oracle traces.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "abo/data.hpp"
#include "abo/forecaster.hpp"

namespace abo::eval {

// Welford accumulator; variance is the sample variance (n - 1).
struct ResidualStats {
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t count = 0;

    void push(double x);
    double variance() const { return count < 2 ? 0.0 : m2 / static_cast<double>(count - 1); }
    static ResidualStats of(std::span<const double> xs);
};

double median(std::vector<double> xs);

// Standardized synthetic series (burn-in dropped) embedded with `lags`.
// n is the raw series length before burn-in.
std::vector<data::LaggedSample> synthetic_stream(std::size_t n, std::uint64_t seed, std::size_t lags,
                                                 std::size_t burn_in = 100);

struct RunOptions {
    bool oracle = false;      // per-step oracle deviation (feature-space models)
    bool keep_trace = false;  // keep per-step records
    bool symmetry = false;    // per-step symmetry drift (cov_rls)
};

struct StepRecord {
    double test_residual = 0.0;  // |y - prediction|
    double train_residual = 0.0;
    double condition = 0.0;
    double oracle_dev = std::numeric_limits<double>::quiet_NaN();
};

struct RunResult {
    ResidualStats train, test, cond;
    double test_median = 0.0;
    double test_mse = 0.0;       // mean squared signed residual
    double test_res_var = 0.0;   // sample variance of the signed residual
    std::size_t steps = 0;
    std::size_t rank_deficient_steps = 0;
    double oracle_dev_max = std::numeric_limits<double>::quiet_NaN();
    double oracle_dev_median = std::numeric_limits<double>::quiet_NaN();
    double symmetry_drift_max = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t restarts = 0;
    std::uint64_t refreshes = 0;
    std::int64_t diverged_at = -1;
    double wall_ms = 0.0;  // steady_clock, steps only
    std::vector<StepRecord> trace;
};

// Initializes on the first model.warmup() samples and steps through the rest
// (at most max_steps). Test residuals are one-step-ahead |y - prediction|.
RunResult prequential_run(Forecaster& model, std::span<const data::LaggedSample> stream, const RunOptions& opts = {},
                          std::size_t max_steps = std::numeric_limits<std::size_t>::max());

struct SweepConfig {
    std::vector<std::size_t> dims;  // empty: 2^1..2^14 plus D = window
    std::size_t window = 20;
    double lambda = 1.0;
    std::size_t steps = 10000;
    std::size_t series_len = 10500;
    std::size_t lags = 7;
    double bandwidth = 1.0;
    std::uint64_t seed = 1;
    ModelKind model = ModelKind::abo;
    bool oracle = false;
    unsigned workers = 1;

    std::vector<std::size_t> resolved_dims() const;
    nlohmann::json to_json() const;
    // Keys absent from j keep the value in base.
    static SweepConfig from_json(const nlohmann::json& j, SweepConfig base);
};

struct SweepRow {
    std::string label;  // "I*" at D = N, else the dimension
    std::size_t dim = 0;
    double log2_dim = 0.0;
    ResidualStats train, test, cond;
    double test_median = 0.0;
    // Reported mean condition number: +inf at the interpolation threshold or
    // when any step was rank deficient; cond.mean keeps the measured value.
    double cond_reported = 0.0;
    double wall_ms = 0.0;
    double oracle_dev_max = std::numeric_limits<double>::quiet_NaN();
    double oracle_dev_median = std::numeric_limits<double>::quiet_NaN();
    double symmetry_drift_max = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t restarts = 0;
    std::uint64_t refreshes = 0;
    std::int64_t diverged_at = -1;
};

// One row per dimension, sorted by D, all on the same stream.
std::vector<SweepRow> sweep_dimensions(const SweepConfig& cfg);
SweepRow sweep_row(const SweepConfig& cfg, std::size_t dim, std::span<const data::LaggedSample> stream);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

struct BenchRow {
    std::size_t dim = 0;
    std::vector<double> wall_ms;  // one entry per repetition
    double mean_ms = 0.0;
    double sd_ms = 0.0;
    double cv_percent = 0.0;
};

// Wall time of `steps` predict/update/downdate steps (diagnostics off) from a
// fresh batch start, repeated. Single lane, steady_clock.
std::vector<BenchRow> bench_runtime(const SweepConfig& cfg, std::size_t repetitions = 10, std::size_t steps = 1000);
void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows);

// Per-step ||beta - beta_batch||_inf (abo or cov_rls) for the first cfg.steps steps at
// cfg.dims.front().
std::vector<double> oracle_trace(const SweepConfig& cfg);

struct FoldSpec {
    std::size_t warmup = 20;  // samples reserved before the first segment (>= largest model window)
    std::size_t val_len = 250;
    std::size_t test_len = 250;
    std::size_t n_val_folds = 8;
    std::size_t n_test_folds = 5;
    // Distance between consecutive segment starts; 0 means the segment length.
    std::size_t stride = 0;

    std::size_t required_length() const;
};

enum class FoldKind { validation, test };

struct Fold {
    FoldKind kind;
    std::size_t index;  // within its kind
    std::size_t begin;  // first evaluated sample
    std::size_t end;    // one past the last
};

// Validation segments first, then test segments, in time order. The model
// for a fold is initialized on the samples right before `begin`. Throws
// DataError naming the required length when the stream is too short.
std::vector<Fold> fold_layout(const FoldSpec& spec, std::size_t stream_len);

struct GridPoint {
    std::size_t window = 20;
    double bandwidth = 1.0;
};

// W in {21, 51, 101, 201, 421, 761} x sigma on `sigma_points` log-spaced
// values in [0.1, 16]. Models that ignore sigma get one point per W.
std::vector<GridPoint> default_grid(ModelKind kind, std::size_t sigma_points = 8);

struct FoldMetrics {
    Fold fold;
    double res_mse = 0.0;
    double res_var = 0.0;
    double test_mean = 0.0;
};

struct GridScore {
    GridPoint point;
    double mean_val_mse = 0.0;
};

struct WalkForwardResult {
    ModelConfig base;
    std::vector<GridScore> scores;
    GridPoint selected;
    std::vector<FoldMetrics> validation;  // of the selected point
    std::vector<FoldMetrics> test;
    double test_mse_mean = 0.0;
    double test_var_mean = 0.0;
};

WalkForwardResult walk_forward(std::span<const data::LaggedSample> stream, const FoldSpec& spec,
                               const ModelConfig& base, const std::vector<GridPoint>& grid, unsigned workers = 1);
void write_folds_csv(const std::string& path, const WalkForwardResult& r);

// Replayable description of an emitted artifact.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::vector<std::string> outputs;

    nlohmann::json to_json() const;  // adds timestamp, version and clock
    void write(const std::string& path) const;
};

std::string version();

}  // namespace abo::eval
