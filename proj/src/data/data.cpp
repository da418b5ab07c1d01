#include "abo/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "abo/errors.hpp"
#include "abo/rng.hpp"

namespace abo::data {
namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_index(const std::string& s, std::size_t& out) {
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

double nonlinear_ar_map(double x) { return 2.0 * x / (1.0 + 0.8 * x * x); }

double nonlinear_ar_map_peak() { return std::sqrt(1.0 / 0.8); }

Series gen_nonlinear_ar(std::size_t n, std::uint64_t seed) {
    Series s;
    s.name = "nonlinear_ar";
    s.sample_seed = seed;
    if (n == 0) return s;
    s.values.resize(n);
    SplitMix64 rng(seed);
    s.values[0] = rng.uniform(-1.0, 1.0);
    for (std::size_t t = 1; t < n; ++t) s.values[t] = nonlinear_ar_map(s.values[t - 1]) + rng.uniform(-1.0, 1.0);
    return s;
}

std::vector<LaggedSample> lag_embed(const Series& s, std::size_t lags) {
    if (lags == 0) throw DataError("lag order must be >= 1");
    if (s.values.size() < lags + 1) {
        throw DataError("series '" + s.name + "' has " + std::to_string(s.values.size()) + " values; " +
                        std::to_string(lags + 1) + " needed for " + std::to_string(lags) + " lags");
    }
    std::vector<LaggedSample> out;
    out.reserve(s.values.size() - lags);
    for (std::size_t t = lags; t < s.values.size(); ++t) {
        LaggedSample smp;
        smp.t = t;
        smp.y = s.values[t];
        smp.x.resize(lags);
        for (std::size_t l = 0; l < lags; ++l) smp.x[l] = s.values[t - 1 - l];
        out.push_back(std::move(smp));
    }
    return out;
}

double OnlineStandardizer::sd() const { return std::sqrt(variance()); }

double OnlineStandardizer::transform(double x) const { return (x - mean_) / std::max(sd(), kSdFloor); }

void OnlineStandardizer::ingest(double x) {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
}

double OnlineStandardizer::push(double x) {
    const double out = transform(x);
    if (mode_ == Mode::expanding) ingest(x);
    return out;
}

Series standardize_series(const Series& s, std::size_t burn_in) {
    Series out;
    out.name = s.name;
    out.sample_seed = s.sample_seed;
    OnlineStandardizer st;
    for (std::size_t t = 0; t < s.values.size(); ++t) {
        const double z = st.push(s.values[t]);
        if (t >= burn_in) out.values.push_back(z);
    }
    return out;
}

Series read_csv_series(const std::string& path, const std::string& column) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::vector<std::vector<std::string>> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        lines.push_back(split_csv_line(line));
    }
    if (lines.empty()) throw DataError("'" + path + "' is empty");

    std::size_t col = 0;
    bool header = false;
    std::size_t index = 0;
    const bool by_index = parse_index(column, index);
    const auto& first = lines.front();
    const auto it = std::find(first.begin(), first.end(), column);
    if (it != first.end()) {
        col = static_cast<std::size_t>(it - first.begin());
        header = true;
    } else if (by_index) {
        col = index;
        double dummy = 0.0;
        header = col < first.size() && !parse_double(first[col], dummy);
    } else {
        throw DataError("column '" + column + "' not found in the header of '" + path + "'");
    }

    Series s;
    s.name = header ? lines.front()[col] : "column " + std::to_string(col);
    for (std::size_t r = header ? 1 : 0; r < lines.size(); ++r) {
        const std::size_t row = header ? r : r + 1;  // 1-based data row
        if (col >= lines[r].size()) {
            throw DataError("'" + path + "' row " + std::to_string(row) + ": missing column " + std::to_string(col));
        }
        double v = 0.0;
        if (!parse_double(lines[r][col], v)) {
            throw DataError("'" + path + "' row " + std::to_string(row) + ": non-numeric cell '" + lines[r][col] + "'");
        }
        s.values.push_back(v);
    }
    if (s.values.empty()) throw DataError("column '" + column + "' of '" + path + "' has no values");
    return s;
}

void write_csv_series(const std::string& path, const Series& s, const std::string& header) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << header << '\n';
    char buf[32];
    for (double v : s.values) {
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        out.write(buf, ptr - buf);
        out << '\n';
    }
    if (!out) throw DataError("write to '" + path + "' failed");
}

}  // namespace abo::data
