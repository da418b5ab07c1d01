#include "abo/forecaster.hpp"

#include <stdexcept>
#include <string>

#include "abo/baselines.hpp"
#include "abo/qr.hpp"
#include "abo/rff.hpp"
#include "abo/rng.hpp"

namespace abo::eval {

ModelKind parse_model(std::string_view name) {
    if (name == "abo") return ModelKind::abo;
    if (name == "cov_rls" || name == "cov") return ModelKind::cov_rls;
    if (name == "qrd_rls" || name == "qrd") return ModelKind::qrd_rls;
    if (name == "krls") return ModelKind::krls;
    throw std::invalid_argument("unknown model '" + std::string(name) + "' (abo, cov_rls, qrd_rls, krls)");
}

std::string_view model_name(ModelKind m) {
    switch (m) {
        case ModelKind::abo: return "abo";
        case ModelKind::cov_rls: return "cov_rls";
        case ModelKind::qrd_rls: return "qrd_rls";
        case ModelKind::krls: return "krls";
    }
    return "?";
}

namespace {

void check_warm(std::span<const data::LaggedSample> warm, std::size_t n) {
    if (warm.size() != n)
        throw std::invalid_argument("init: expected " + std::to_string(n) + " warm-up samples, got " +
                                    std::to_string(warm.size()));
}

class FeatureModel : public Forecaster {
  protected:
    explicit FeatureModel(const ModelConfig& cfg)
        : cfg_(cfg),
          map_(rff::sample_feature_map(cfg.lags, cfg.feature_dim, cfg.bandwidth, derive_seed(cfg.seed, cfg.feature_dim))),
          z_(cfg.feature_dim) {}

    std::span<const double> embed(const data::LaggedSample& s) {
        map_.embed(s.x, z_);
        return z_;
    }
    DenseMatrix embed_all(std::span<const data::LaggedSample> warm, Vector& y) {
        DenseMatrix z(0, cfg_.feature_dim);
        y.clear();
        for (const auto& s : warm) {
            z.push_row(embed(s));
            y.push_back(s.y);
        }
        return z;
    }

    ModelConfig cfg_;
    rff::FeatureMap map_;
    Vector z_;
};

class AboModel final : public FeatureModel {
  public:
    explicit AboModel(const ModelConfig& cfg) : FeatureModel(cfg), filter_(cfg.window, cfg.feature_dim, options(cfg)) {}

    std::size_t warmup() const override { return cfg_.window; }
    void init(std::span<const data::LaggedSample> warm) override {
        check_warm(warm, cfg_.window);
        Vector y;
        const DenseMatrix z = embed_all(warm, y);
        filter_.init(z, y);
    }
    StepOutput step(const data::LaggedSample& s) override { return filter_.step(embed(s), s.y); }
    std::optional<double> oracle_deviation() const override {
        const auto ref = linalg::batch_weighted_minnorm(filter_.window_z(), filter_.window_y(), filter_.lambda());
        return linalg::max_abs_diff(ref, filter_.beta());
    }
    std::uint64_t restarts() const override { return filter_.restart_count(); }
    std::uint64_t refreshes() const override { return filter_.refresh_count(); }

  private:
    static FilterOptions options(const ModelConfig& cfg) {
        FilterOptions o;
        o.lambda = cfg.lambda;
        o.diagnostics = cfg.diagnostics;
        o.growth_limit = cfg.growth_limit;
        return o;
    }
    AboFilter filter_;
};

class CovModel final : public FeatureModel {
  public:
    explicit CovModel(const ModelConfig& cfg) : FeatureModel(cfg), model_(cfg.window, cfg.feature_dim, cfg.lambda) {}

    std::size_t warmup() const override { return cfg_.window; }
    void init(std::span<const data::LaggedSample> warm) override {
        check_warm(warm, cfg_.window);
        Vector y;
        const DenseMatrix z = embed_all(warm, y);
        model_.init(z, y);
    }
    StepOutput step(const data::LaggedSample& s) override { return model_.step(embed(s), s.y); }
    std::optional<double> oracle_deviation() const override {
        const auto ref = linalg::batch_weighted_minnorm(model_.window_z(), model_.window_y(), model_.lambda());
        double worst = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            const double d = std::abs(ref[i] - model_.beta()[i]);
            if (!(d <= worst)) worst = d;  // NaN propagates
        }
        return worst;
    }
    std::int64_t diverged_at() const override { return model_.diverged_at(); }
    std::optional<double> symmetry_drift() const override { return model_.symmetry_drift(); }

  private:
    CovRls model_;
};

class QrdModel final : public Forecaster {
  public:
    explicit QrdModel(const ModelConfig& cfg) : cfg_(cfg), model_(cfg.lags, cfg.window, cfg.ridge) {}

    std::size_t warmup() const override { return cfg_.window; }
    void init(std::span<const data::LaggedSample> warm) override {
        check_warm(warm, cfg_.window);
        std::vector<Vector> x;
        Vector y;
        for (const auto& s : warm) {
            x.push_back(s.x);
            y.push_back(s.y);
        }
        model_.init(x, y);
    }
    StepOutput step(const data::LaggedSample& s) override { return model_.step(s.x, s.y); }
    std::uint64_t restarts() const override { return model_.failed_downdates(); }

  private:
    ModelConfig cfg_;
    QrdRls model_;
};

class KrlsModel final : public Forecaster {
  public:
    explicit KrlsModel(const ModelConfig& cfg) : cfg_(cfg), model_(cfg.window, cfg.bandwidth, cfg.ridge) {}

    std::size_t warmup() const override { return cfg_.window; }
    void init(std::span<const data::LaggedSample> warm) override {
        check_warm(warm, cfg_.window);
        std::vector<Vector> x;
        Vector y;
        for (const auto& s : warm) {
            x.push_back(s.x);
            y.push_back(s.y);
        }
        model_.init(x, y);
    }
    StepOutput step(const data::LaggedSample& s) override { return model_.step(s.x, s.y); }

  private:
    ModelConfig cfg_;
    Krls model_;
};

}  // namespace

std::unique_ptr<Forecaster> make_forecaster(const ModelConfig& cfg) {
    switch (cfg.kind) {
        case ModelKind::abo: return std::make_unique<AboModel>(cfg);
        case ModelKind::cov_rls: return std::make_unique<CovModel>(cfg);
        case ModelKind::qrd_rls: return std::make_unique<QrdModel>(cfg);
        case ModelKind::krls: return std::make_unique<KrlsModel>(cfg);
    }
    throw std::invalid_argument("make_forecaster: bad model kind");
}

}  // namespace abo::eval
