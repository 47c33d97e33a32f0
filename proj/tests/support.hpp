#pragma once

// Shared fixtures for the test binaries: synthetic datasets, a temporary
// directory, and a small dense solver used as an independent oracle.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

#include "omt/dataset.hpp"
#include "omt/rng.hpp"

namespace omt::test {

inline FeatureSchema numeric(std::string name) {
    return {std::move(name), FeatureKind::numeric, ColumnRole::feature, "", {}};
}

inline FeatureSchema categorical(std::string name, std::vector<std::string> levels) {
    return {std::move(name), FeatureKind::categorical, ColumnRole::feature, "", std::move(levels)};
}

inline FeatureSchema effort_column() { return {"effort", FeatureKind::numeric, ColumnRole::target, "", {}}; }

/// Numeric-only dataset from row vectors.
inline Dataset table(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
    std::vector<FeatureSchema> features;
    const std::size_t p = x.empty() ? 0 : x.front().size();
    for (std::size_t j = 0; j < p; ++j) features.push_back(numeric("x" + std::to_string(j)));
    std::vector<double> cells;
    for (const auto& row : x) cells.insert(cells.end(), row.begin(), row.end());
    return Dataset(features, effort_column(), cells, y);
}

/// `rows` x `p` features uniform in [lo, hi), effort = target(row).
inline Dataset random_table(std::size_t rows, std::size_t p, std::uint64_t seed,
                            const std::function<double(const std::vector<double>&, Rng&)>& target,
                            double lo = 0.0, double hi = 1.0) {
    Rng rng(seed);
    std::vector<std::vector<double>> x(rows, std::vector<double>(p));
    std::vector<double> y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        for (auto& v : x[r]) v = rng.uniform(lo, hi);
        y[r] = target(x[r], rng);
    }
    return table(x, y);
}

/// Least squares with intercept by Gaussian elimination on the centered
/// normal equations, optionally with each diagonal entry scaled by
/// (1 + damping). Returns {intercept, b1, ..., bp}.
inline std::vector<double> normal_equations(const Dataset& d, double damping = 0.0) {
    const std::size_t p = d.feature_count();
    const auto n = static_cast<double>(d.rows());
    std::vector<double> mean(p, 0.0);
    double y_mean = 0.0;
    for (std::size_t r = 0; r < d.rows(); ++r) {
        for (std::size_t j = 0; j < p; ++j) mean[j] += d.value(r, j) / n;
        y_mean += d.effort(r) / n;
    }
    std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
    for (std::size_t r = 0; r < d.rows(); ++r) {
        for (std::size_t i = 0; i < p; ++i) {
            const double zi = d.value(r, i) - mean[i];
            for (std::size_t k = 0; k < p; ++k) a[i][k] += zi * (d.value(r, k) - mean[k]);
            a[i][p] += zi * (d.effort(r) - y_mean);
        }
    }
    for (std::size_t i = 0; i < p; ++i) a[i][i] *= 1.0 + damping;
    for (std::size_t c = 0; c < p; ++c) {
        std::size_t pivot = c;
        for (std::size_t r = c + 1; r < p; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[pivot][c])) pivot = r;
        }
        std::swap(a[c], a[pivot]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == c) continue;
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k <= p; ++k) a[r][k] -= f * a[c][k];
        }
    }
    std::vector<double> beta(p + 1);
    beta[0] = y_mean;
    for (std::size_t i = 0; i < p; ++i) {
        beta[i + 1] = a[i][p] / a[i][i];
        beta[0] -= beta[i + 1] * mean[i];
    }
    return beta;
}

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("omt-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

/// Synthetic project table with a size-driven piecewise effort, a team
/// size, and a categorical language column. Written as `<id>.csv` and
/// `<id>.schema` into `dir`.
inline void write_synthetic_projects(const std::filesystem::path& dir, const std::string& id,
                                     std::size_t rows, std::uint64_t seed) {
    Rng rng(seed);
    const char* langs[] = {"cobol", "c", "java"};
    std::string csv = "size,team,lang,effort\n";
    for (std::size_t r = 0; r < rows; ++r) {
        const double size = rng.uniform(5.0, 120.0);
        const double team = static_cast<double>(1 + rng.below(9));
        const std::size_t lang = rng.below(3);
        double effort = size < 60.0 ? 2.0 * size : 120.0 + 6.0 * (size - 60.0);
        effort += 4.0 * team + (lang == 0 ? 25.0 : 0.0);
        effort *= std::exp(0.15 * rng.normal());
        csv += std::to_string(size) + "," + std::to_string(static_cast<int>(team)) + "," + langs[lang] +
               "," + std::to_string(effort) + "\n";
    }
    write_file(dir / (id + ".csv"), csv);
    write_file(dir / (id + ".schema"),
               "size,numeric,feature,fp\nteam,numeric,feature\nlang,categorical,feature\n"
               "effort,numeric,target,hours\n");
}

}  // namespace omt::test
