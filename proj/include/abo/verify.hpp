#pragma once

// Desk-scale invariant suite behind `abo_cli verify`.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace abo::verify {

struct Options {
    bool quick = false;
    double tau_rank = 1e-10;  // fault injection hook
    std::uint64_t seed = 1;
};

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Each check is reported through `on_check` as soon as it finishes.
std::vector<Check> run(const Options& opts, const std::function<void(const Check&)>& on_check = {});

// Individual invariants, also used by the acceptance suite.
// Max per-step ||beta - beta_batch||_inf over `steps` steps.
double oracle_max_deviation(std::size_t dim, double lambda, std::size_t steps, std::uint64_t seed,
                            double tau_rank = 1e-10);
// Worst Penrose residual after every update and downdate of a filter run
// with randomized lambda per dimension.
double penrose_fuzz_worst(std::size_t dim, std::size_t steps, std::uint64_t seed, double tau_rank = 1e-10);
// Worst ||R^T R_after - (R^T R_before - lambda^N z z^T)||_max / ||R^T R_before||_max.
double gramian_identity_worst(std::size_t dim, double lambda, std::size_t steps, std::uint64_t seed,
                              double tau_rank = 1e-10);

}  // namespace abo::verify
