#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace abo::data {

struct Series {
    std::vector<double> values;
    std::string name;
    std::uint64_t sample_seed = 0;  // 0 for external data
};

// x -> 2x / (1 + 0.8 x^2), the deterministic part of the synthetic process.
double nonlinear_ar_map(double x);
// max |nonlinear_ar_map| = sqrt(1/0.8), attained at x = 1/sqrt(0.8)
double nonlinear_ar_map_peak();

// x_0 ~ U(-1, 1), x_t = nonlinear_ar_map(x_{t-1}) + e_t, e_t ~ U(-1, 1).
Series gen_nonlinear_ar(std::size_t n, std::uint64_t seed);

struct LaggedSample {
    std::vector<double> x;  // (x_{t-1}, ..., x_{t-L})
    double y = 0.0;         // x_t
    std::size_t t = 0;
};

// Throws DataError when the series has fewer than lags + 1 values.
std::vector<LaggedSample> lag_embed(const Series& s, std::size_t lags);

// Causal z-score: each value is scaled with the mean and sample standard
// deviation of the values seen strictly before it.
class OnlineStandardizer {
  public:
    enum class Mode { expanding, frozen };
    static constexpr double kSdFloor = 1e-8;

    double push(double x);
    double transform(double x) const;
    void ingest(double x);

    void freeze() { mode_ = Mode::frozen; }
    void unfreeze() { mode_ = Mode::expanding; }
    Mode mode() const { return mode_; }

    std::size_t count() const { return count_; }
    double mean() const { return mean_; }
    // Sample variance; zero with fewer than two observations.
    double variance() const { return count_ < 2 ? 0.0 : m2_ / static_cast<double>(count_ - 1); }
    double sd() const;

  private:
    std::size_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
    Mode mode_ = Mode::expanding;
};

// Standardizes s causally. The first burn_in values only feed the statistics
// and are dropped from the output.
Series standardize_series(const Series& s, std::size_t burn_in);

// One numeric column of a comma-separated file. `column` is a header name or
// a zero-based index. The first line is a header when the selected cell does
// not parse as a number. Throws DataError naming the file, column or row.
Series read_csv_series(const std::string& path, const std::string& column);

// One-column CSV with a header line; values printed round-trip exact.
void write_csv_series(const std::string& path, const Series& s, const std::string& header = "value");

}  // namespace abo::data
