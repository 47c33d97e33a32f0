#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "omt/baselines.hpp"
#include "omt/bees.hpp"
#include "omt/dataset.hpp"
#include "omt/metrics.hpp"
#include "omt/model_tree.hpp"

namespace omt {

enum class Method { omt, mt_default, cbr, swr, mlp };

inline constexpr Method kAllMethods[] = {Method::omt, Method::mt_default, Method::cbr, Method::swr,
                                         Method::mlp};

/// "OMT", "MT-default", "CBR", "SWR", "MLP".
std::string_view method_name(Method m);
/// Case-insensitive; accepts the display names plus "mt_default".
std::optional<Method> parse_method(std::string_view name);

struct NamedDataset {
    std::string id;
    Dataset data;
};

struct ExperimentConfig {
    std::vector<NamedDataset> datasets;
    std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
    std::size_t folds = 3;
    std::size_t repeats = 10;
    std::uint64_t base_seed = 1;
    BeesConfig bees;
    MTParams mt_default;
    MlpConfig mlp;
    double alpha = 0.05;
    std::size_t workers = 1;

    /// Throws std::invalid_argument.
    void validate() const;
};

/// One (dataset, repeat, fold, method) work unit.
struct CellResult {
    std::size_t dataset = 0;  // index into the config's datasets
    Method method = Method::omt;
    std::size_t repeat = 0;
    std::size_t fold = 0;
    bool ok = false;
    std::string error;
    std::vector<std::size_t> test_rows;
    std::vector<std::size_t> train_rows;
    PredictionSet test;   // parallel to test_rows
    PredictionSet train;  // parallel to train_rows
    std::optional<MTParams> params;  // tree methods
    std::vector<TraceRow> trace;     // OMT only
};

struct MetricSummary {
    std::string dataset;
    Method method = Method::omt;
    std::string split;  // "test" or "train"
    double mmre = 0.0;
    double mdmre = 0.0;
    double pred = 0.0;
};

struct SignificanceRow {
    std::string dataset;
    Method baseline = Method::cbr;
    SignificanceResult result;
};

struct ExperimentReport {
    std::vector<std::string> dataset_ids;
    std::vector<Method> methods;
    std::size_t folds = 0;
    std::size_t repeats = 0;
    std::uint64_t base_seed = 0;
    std::vector<CellResult> cells;  // ordered by dataset, repeat, fold, method
    std::vector<MetricSummary> summary;
    std::vector<SignificanceRow> significance;

    std::size_t failures() const;
};

/// Seed of the stratified folds for one repeat.
inline std::uint64_t repeat_seed(std::uint64_t base_seed, std::size_t repeat) {
    return base_seed + repeat;
}

/// Seed handed to a stochastic method for one cell. Depends only on the
/// repeat seed, the fold and the method, so adding or removing methods
/// leaves every other cell unchanged.
std::uint64_t cell_seed(std::uint64_t base_seed, std::size_t repeat, std::size_t fold, Method m);

/// Runs every requested method on the shared folds of each repeat. A method
/// failure is stored in its cell and never aborts the rest.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Per split, metrics of the repeat's pooled predictions averaged over
/// repeats. Failed cells are skipped.
std::vector<MetricSummary> summarize(const ExperimentReport& rep);

/// OMT against every other method on absolute test residuals pooled over
/// repeats and folds. Empty when OMT did not run.
std::vector<SignificanceRow> compare_to_omt(const ExperimentReport& rep, double alpha);

/// Writes summary.csv, significance.csv and residuals.csv, plus traces.csv
/// when OMT ran. Throws std::runtime_error if a file cannot be written.
void export_report(const ExperimentReport& rep, const std::filesystem::path& out_dir);

}  // namespace omt
