#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace omt {

enum class FeatureKind { numeric, categorical };
enum class ColumnRole { feature, target, ignore };

std::string_view to_string(FeatureKind kind);
std::string_view to_string(ColumnRole role);

struct FeatureSchema {
    std::string name;
    FeatureKind kind = FeatureKind::numeric;
    ColumnRole role = ColumnRole::feature;
    std::string unit;
    /// Observed levels of a categorical column, in first-seen order.
    /// Categorical cells store an index into this list.
    std::vector<std::string> levels;

    bool operator==(const FeatureSchema&) const = default;
};

/// Raised for malformed input files and datasets that violate their
/// invariants. The message carries file, row and column where known.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A project table: feature columns plus one strictly positive effort
/// column. Cells are stored row-major as doubles; categorical cells hold a
/// level index and missing cells hold NaN. Immutable after construction.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<FeatureSchema> features, FeatureSchema target,
            std::vector<double> cells, std::vector<double> effort);

    std::size_t rows() const { return effort_.size(); }
    std::size_t feature_count() const { return features_.size(); }

    const std::vector<FeatureSchema>& features() const { return features_; }
    const FeatureSchema& feature(std::size_t j) const { return features_.at(j); }
    const FeatureSchema& target() const { return target_; }
    std::optional<std::size_t> find_feature(std::string_view name) const;
    std::vector<std::size_t> numeric_features() const;
    std::vector<std::size_t> categorical_features() const;

    double value(std::size_t row, std::size_t j) const { return cells_[row * features_.size() + j]; }
    bool missing(std::size_t row, std::size_t j) const;
    bool has_missing() const;
    std::span<const double> row(std::size_t r) const {
        return {cells_.data() + r * features_.size(), features_.size()};
    }
    std::vector<double> column(std::size_t j) const;

    double effort(std::size_t row) const { return effort_[row]; }
    std::span<const double> efforts() const { return effort_; }

    /// Rows in the given order; schema (including level lists) is shared.
    Dataset subset(std::span<const std::size_t> rows) const;
    /// Same schema and efforts with replaced cells.
    Dataset with_cells(std::vector<double> cells) const;
    Dataset with_efforts(std::vector<double> effort) const;

    bool operator==(const Dataset& other) const;

private:
    std::vector<FeatureSchema> features_;
    FeatureSchema target_;
    std::vector<double> cells_;
    std::vector<double> effort_;
};

struct LoadOptions {
    std::vector<std::string> missing_tokens{"?"};
};

struct LoadReport {
    std::size_t rows_read = 0;
    std::size_t rows_rejected = 0;  // missing effort
};

/// Reads `name,kind,role[,unit]` lines; blank lines and `#` comments skipped.
std::vector<FeatureSchema> read_schema(const std::filesystem::path& schema_path);

/// Parses a comma-delimited file with header against its schema sidecar.
/// Unparseable numeric cells and missing tokens become missing; rows with a
/// missing effort are dropped and counted in `report`.
Dataset load_dataset(const std::filesystem::path& data_path,
                     const std::filesystem::path& schema_path,
                     const LoadOptions& options = {}, LoadReport* report = nullptr);

/// Writes features then target, `?` for missing cells, shortest round-trip
/// number formatting, plus the matching schema sidecar.
void save_dataset(const Dataset& d, const std::filesystem::path& data_path,
                  const std::filesystem::path& schema_path);

struct StatsReport {
    std::size_t cases = 0;
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double skewness = 0.0;
};

/// Effort statistics; skewness is the adjusted Fisher-Pearson coefficient
/// G1 = sqrt(n(n-1))/(n-2) * m3 / m2^1.5, zero for a constant sample.
StatsReport summary_stats(std::span<const double> effort);
StatsReport summary_stats(const Dataset& d);

/// Fills missing cells: numeric with the column mean, categorical with the
/// most frequent level (lowest index on ties), both taken from the data the
/// imputer was fitted on. Columns that are entirely missing fill with 0.
class Imputer {
public:
    Imputer() = default;
    static Imputer fit(const Dataset& train);

    Dataset apply(const Dataset& d) const;
    void apply(std::span<double> row) const;
    std::span<const double> fill_values() const { return fill_; }

private:
    std::vector<double> fill_;
};

/// Per-feature affine map x -> (x - min) / (max - min) fitted on one dataset
/// and applicable to any other with the same schema. Constant features map
/// to 0; categorical features pass through unchanged.
class MinMaxScaler {
public:
    MinMaxScaler() = default;
    static MinMaxScaler fit(const Dataset& train);

    double transform(std::size_t j, double x) const;
    double inverse(std::size_t j, double x) const;
    Dataset transform(const Dataset& d) const;
    Dataset inverse(const Dataset& d) const;

    double lower(std::size_t j) const { return lower_.at(j); }
    double upper(std::size_t j) const { return upper_.at(j); }

private:
    std::vector<bool> scaled_;
    std::vector<double> lower_;
    std::vector<double> upper_;
};

struct NormalizedDataset {
    Dataset data;
    MinMaxScaler scaler;
};

NormalizedDataset min_max_normalize(const Dataset& d);

/// Replaces x with ln(x + 1) in the named numeric columns. The target name
/// is accepted and transforms the effort column.
Dataset log_transform(const Dataset& d, std::span<const std::string> columns);

struct FoldAssignment {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::size_t strata_bins = 0;
    std::vector<std::size_t> assignment;
    /// Stratum (effort-quantile bin) of each row.
    std::vector<std::size_t> stratum;

    std::vector<std::size_t> test_rows(std::size_t fold) const;
    std::vector<std::size_t> train_rows(std::size_t fold) const;
    std::size_t fold_size(std::size_t fold) const;
};

/// Stratified assignment: rows sorted by effort (ties by index) are cut into
/// `strata_bins` quantile bins, shuffled within each bin, then dealt
/// round-robin into k folds with the deal counter running across bins.
/// strata_bins == 0 means k bins.
FoldAssignment make_folds(const Dataset& d, std::size_t k, std::uint64_t seed,
                          std::size_t strata_bins = 0);
FoldAssignment make_folds(std::span<const double> effort, std::size_t k, std::uint64_t seed,
                          std::size_t strata_bins = 0);

}  // namespace omt
