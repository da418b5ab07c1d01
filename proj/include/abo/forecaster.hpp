#pragma once

// Uniform stepping interface over the filter and the baselines, as used by
// the experiment drivers. Feature-space models own their random Fourier map.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "abo/data.hpp"
#include "abo/filter.hpp"

namespace abo::eval {

enum class ModelKind { abo, cov_rls, qrd_rls, krls };

// Accepts "abo", "cov_rls"/"cov", "qrd_rls"/"qrd", "krls". Throws std::invalid_argument.
ModelKind parse_model(std::string_view name);
std::string_view model_name(ModelKind m);

struct ModelConfig {
    ModelKind kind = ModelKind::abo;
    std::size_t window = 20;        // N for abo / cov_rls, W for qrd_rls / krls
    std::size_t feature_dim = 1024;  // D (abo, cov_rls)
    std::size_t lags = 7;
    double lambda = 1.0;
    double bandwidth = 1.0;  // RFF / RBF sigma
    double ridge = 1e-2;     // qrd_rls, krls
    std::uint64_t seed = 1;  // the feature map is drawn from derive_seed(seed, D)
    bool diagnostics = true;
    double growth_limit = 1e4;
};

class Forecaster {
  public:
    virtual ~Forecaster() = default;

    // Number of leading samples consumed by init().
    virtual std::size_t warmup() const = 0;
    virtual void init(std::span<const data::LaggedSample> warm) = 0;
    virtual StepOutput step(const data::LaggedSample& s) = 0;

    // ||beta - beta_batch||_inf against the weighted minimum-norm solution on
    // the current window; empty for models without a feature-space oracle.
    virtual std::optional<double> oracle_deviation() const { return std::nullopt; }
    virtual std::uint64_t restarts() const { return 0; }
    virtual std::uint64_t refreshes() const { return 0; }
    // First step with non-finite state, -1 if none.
    virtual std::int64_t diverged_at() const { return -1; }
    // ||P - P^T||_max of a maintained Gram pseudoinverse, if any.
    virtual std::optional<double> symmetry_drift() const { return std::nullopt; }
};

std::unique_ptr<Forecaster> make_forecaster(const ModelConfig& cfg);

}  // namespace abo::eval
