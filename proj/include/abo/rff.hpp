#pragma once

// Random Fourier features for the Gaussian kernel
//   k(x, x') = exp(-||x - x'||^2 / (2 sigma^2)),
// z(x) = sqrt(2/D) cos(A^T x + b), A entries ~ N(0, sigma^-2), b ~ U[0, 2pi).
// sigma is a length-scale.

#include <cstddef>
#include <cstdint>
#include <span>

#include <json.hpp>

#include "abo/dense.hpp"

namespace abo::rff {

using linalg::DenseMatrix;
using linalg::Vector;

class FeatureMap {
  public:
    FeatureMap() = default;

    std::size_t input_dim() const { return input_dim_; }
    std::size_t feature_dim() const { return feature_dim_; }
    double bandwidth() const { return bandwidth_; }
    std::uint64_t seed() const { return seed_; }
    // input_dim x feature_dim; row k holds the k-th coordinate of every frequency.
    const DenseMatrix& frequencies() const { return frequencies_; }
    const Vector& phases() const { return phases_; }

    // out must have feature_dim entries.
    void embed(std::span<const double> x, std::span<double> out) const;
    Vector embed(std::span<const double> x) const;

    nlohmann::json to_json() const;
    static FeatureMap from_json(const nlohmann::json& j);

    // Explicit parameters, for tests and hand-built maps. seed is recorded only.
    static FeatureMap from_parameters(DenseMatrix frequencies, Vector phases, double bandwidth,
                                      std::uint64_t seed = 0);

  private:
    friend FeatureMap sample_feature_map(std::size_t, std::size_t, double, std::uint64_t);

    std::size_t input_dim_ = 0;
    std::size_t feature_dim_ = 0;
    double bandwidth_ = 1.0;
    std::uint64_t seed_ = 0;
    DenseMatrix frequencies_;
    Vector phases_;
};

// Throws std::invalid_argument on zero dimensions or a non-positive bandwidth.
FeatureMap sample_feature_map(std::size_t input_dim, std::size_t feature_dim, double bandwidth, std::uint64_t seed);

// embed(x)^T embed(x2)
double kernel_estimate(const FeatureMap& map, std::span<const double> x, std::span<const double> x2);

// exp(-||x - x2||^2 / (2 sigma^2))
double gaussian_kernel(std::span<const double> x, std::span<const double> x2, double bandwidth);

}  // namespace abo::rff
