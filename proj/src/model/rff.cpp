#include "abo/rff.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "abo/rng.hpp"
#include "abo/simd.hpp"

namespace abo::rff {
namespace {

void check_input(const FeatureMap& m, std::size_t n) {
    if (n != m.input_dim()) {
        throw std::invalid_argument("embed: expected " + std::to_string(m.input_dim()) + " inputs, got " +
                                    std::to_string(n));
    }
}

}  // namespace

FeatureMap sample_feature_map(std::size_t input_dim, std::size_t feature_dim, double bandwidth, std::uint64_t seed) {
    if (input_dim == 0 || feature_dim == 0) throw std::invalid_argument("feature map dimensions must be >= 1");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw std::invalid_argument("bandwidth must be > 0");
    FeatureMap m;
    m.input_dim_ = input_dim;
    m.feature_dim_ = feature_dim;
    m.bandwidth_ = bandwidth;
    m.seed_ = seed;
    m.frequencies_ = DenseMatrix(input_dim, feature_dim);
    m.phases_.resize(feature_dim);

    SplitMix64 rng(seed);
    const double sd = 1.0 / bandwidth;
    // Column-major draw order: frequency j is drawn in full before j + 1, so a
    // map with more features extends a smaller one with the same seed.
    for (std::size_t j = 0; j < feature_dim; ++j)
        for (std::size_t k = 0; k < input_dim; ++k) m.frequencies_(k, j) = rng.normal(0.0, sd);
    SplitMix64 phase_rng(derive_seed(seed, 1));
    const double two_pi = 2.0 * std::numbers::pi;
    for (auto& b : m.phases_) {
        b = two_pi * phase_rng.uniform01();
        if (b >= two_pi) b = std::nextafter(two_pi, 0.0);
    }
    return m;
}

FeatureMap FeatureMap::from_parameters(DenseMatrix frequencies, Vector phases, double bandwidth, std::uint64_t seed) {
    if (frequencies.rows() == 0 || frequencies.cols() == 0) throw std::invalid_argument("empty frequency matrix");
    if (phases.size() != frequencies.cols()) throw std::invalid_argument("one phase per frequency required");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be > 0");
    FeatureMap m;
    m.input_dim_ = frequencies.rows();
    m.feature_dim_ = frequencies.cols();
    m.bandwidth_ = bandwidth;
    m.seed_ = seed;
    m.frequencies_ = std::move(frequencies);
    m.phases_ = std::move(phases);
    return m;
}

void FeatureMap::embed(std::span<const double> x, std::span<double> out) const {
    check_input(*this, x.size());
    if (out.size() != feature_dim_) throw std::invalid_argument("embed: output size mismatch");
    std::copy(phases_.begin(), phases_.end(), out.begin());
    for (std::size_t k = 0; k < input_dim_; ++k) simd::axpy(x[k], frequencies_.row(k), out);
    const double amp = std::sqrt(2.0 / static_cast<double>(feature_dim_));
    for (auto& v : out) v = amp * std::cos(v);
}

Vector FeatureMap::embed(std::span<const double> x) const {
    Vector out(feature_dim_);
    embed(x, out);
    return out;
}

nlohmann::json FeatureMap::to_json() const {
    return {{"input_dim", input_dim_}, {"feature_dim", feature_dim_}, {"bandwidth", bandwidth_}, {"seed", seed_}};
}

FeatureMap FeatureMap::from_json(const nlohmann::json& j) {
    return sample_feature_map(j.at("input_dim").get<std::size_t>(), j.at("feature_dim").get<std::size_t>(),
                              j.at("bandwidth").get<double>(), j.at("seed").get<std::uint64_t>());
}

double kernel_estimate(const FeatureMap& map, std::span<const double> x, std::span<const double> x2) {
    const Vector a = map.embed(x);
    const Vector b = map.embed(x2);
    return simd::dot(a, b);
}

double gaussian_kernel(std::span<const double> x, std::span<const double> x2, double bandwidth) {
    if (x.size() != x2.size()) throw std::invalid_argument("gaussian_kernel: dimension mismatch");
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - x2[i]) * (x[i] - x2[i]);
    return std::exp(-d2 / (2.0 * bandwidth * bandwidth));
}

}  // namespace abo::rff
