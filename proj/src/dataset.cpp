#include "omt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "omt/rng.hpp"

namespace omt {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

// Comma split with double-quote support ("" escapes a quote).
std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(was_quoted ? current : trim(current));
            current.clear();
            was_quoted = false;
        } else {
            current += c;
        }
    }
    fields.push_back(was_quoted ? current : trim(current));
    return fields;
}

std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double value = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) return std::nullopt;
    return value;
}

std::string format_number(double x) { return fmt::format("{}", x); }

bool needs_quotes(std::string_view s) {
    return s.find_first_of(",\"") != std::string_view::npos || s != trim(s);
}

std::string quote(std::string_view s) {
    if (!needs_quotes(s)) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::string_view to_string(FeatureKind kind) {
    return kind == FeatureKind::numeric ? "numeric" : "categorical";
}

std::string_view to_string(ColumnRole role) {
    switch (role) {
        case ColumnRole::feature: return "feature";
        case ColumnRole::target: return "target";
        case ColumnRole::ignore: return "ignore";
    }
    return "feature";
}

// ---------------------------------------------------------------- Dataset

Dataset::Dataset(std::vector<FeatureSchema> features, FeatureSchema target,
                 std::vector<double> cells, std::vector<double> effort)
    : features_(std::move(features)),
      target_(std::move(target)),
      cells_(std::move(cells)),
      effort_(std::move(effort)) {
    if (cells_.size() != features_.size() * effort_.size()) {
        throw DataError(fmt::format("dataset has {} cells, expected {} rows x {} features",
                                    cells_.size(), effort_.size(), features_.size()));
    }
    if (target_.kind != FeatureKind::numeric) {
        throw DataError(fmt::format("target column '{}' must be numeric", target_.name));
    }
    for (std::size_t r = 0; r < effort_.size(); ++r) {
        if (!std::isfinite(effort_[r]) || effort_[r] <= 0.0) {
            throw DataError(fmt::format("row {}: column '{}': non-positive effort {}", r,
                                        target_.name, effort_[r]));
        }
    }
    for (std::size_t j = 0; j < features_.size(); ++j) {
        if (features_[j].kind != FeatureKind::categorical) continue;
        const auto levels = static_cast<double>(features_[j].levels.size());
        for (std::size_t r = 0; r < effort_.size(); ++r) {
            const double v = value(r, j);
            if (std::isnan(v)) continue;
            if (v < 0 || v >= levels || v != std::floor(v)) {
                throw DataError(fmt::format("row {}: column '{}': level index {} out of range",
                                            r, features_[j].name, v));
            }
        }
    }
}

std::optional<std::size_t> Dataset::find_feature(std::string_view name) const {
    for (std::size_t j = 0; j < features_.size(); ++j) {
        if (features_[j].name == name) return j;
    }
    return std::nullopt;
}

std::vector<std::size_t> Dataset::numeric_features() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < features_.size(); ++j) {
        if (features_[j].kind == FeatureKind::numeric) out.push_back(j);
    }
    return out;
}

std::vector<std::size_t> Dataset::categorical_features() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < features_.size(); ++j) {
        if (features_[j].kind == FeatureKind::categorical) out.push_back(j);
    }
    return out;
}

bool Dataset::missing(std::size_t row, std::size_t j) const { return std::isnan(value(row, j)); }

bool Dataset::has_missing() const {
    return std::any_of(cells_.begin(), cells_.end(), [](double v) { return std::isnan(v); });
}

std::vector<double> Dataset::column(std::size_t j) const {
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = value(r, j);
    return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    const std::size_t p = features_.size();
    std::vector<double> cells;
    cells.reserve(rows.size() * p);
    std::vector<double> effort;
    effort.reserve(rows.size());
    for (const std::size_t r : rows) {
        if (r >= this->rows()) throw std::out_of_range("Dataset::subset: row index out of range");
        const auto src = row(r);
        cells.insert(cells.end(), src.begin(), src.end());
        effort.push_back(effort_[r]);
    }
    Dataset out;
    out.features_ = features_;
    out.target_ = target_;
    out.cells_ = std::move(cells);
    out.effort_ = std::move(effort);
    return out;
}

Dataset Dataset::with_cells(std::vector<double> cells) const {
    return Dataset(features_, target_, std::move(cells), effort_);
}

Dataset Dataset::with_efforts(std::vector<double> effort) const {
    return Dataset(features_, target_, cells_, std::move(effort));
}

bool Dataset::operator==(const Dataset& other) const {
    if (features_ != other.features_ || target_ != other.target_ ||
        effort_ != other.effort_ || cells_.size() != other.cells_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        const double a = cells_[i];
        const double b = other.cells_[i];
        if (std::isnan(a) != std::isnan(b)) return false;
        if (!std::isnan(a) && a != b) return false;
    }
    return true;
}

// ---------------------------------------------------------------- I/O

std::vector<FeatureSchema> read_schema(const std::filesystem::path& schema_path) {
    std::ifstream in(schema_path);
    if (!in) throw DataError(fmt::format("{}: cannot open schema file", schema_path.string()));
    std::vector<FeatureSchema> schema;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string content = trim(line);
        if (content.empty() || content.front() == '#') continue;
        const auto fields = split_csv(content);
        const auto where = fmt::format("{}:{}", schema_path.string(), line_no);
        if (fields.size() < 3 || fields.size() > 4) {
            throw DataError(fmt::format("{}: expected 'name,kind,role[,unit]'", where));
        }
        FeatureSchema col;
        col.name = fields[0];
        if (col.name.empty()) throw DataError(fmt::format("{}: empty column name", where));
        if (fields[1] == "numeric") {
            col.kind = FeatureKind::numeric;
        } else if (fields[1] == "categorical") {
            col.kind = FeatureKind::categorical;
        } else {
            throw DataError(fmt::format("{}: unknown kind '{}'", where, fields[1]));
        }
        if (fields[2] == "feature") {
            col.role = ColumnRole::feature;
        } else if (fields[2] == "target") {
            col.role = ColumnRole::target;
        } else if (fields[2] == "ignore") {
            col.role = ColumnRole::ignore;
        } else {
            throw DataError(fmt::format("{}: unknown role '{}'", where, fields[2]));
        }
        if (fields.size() == 4) col.unit = fields[3];
        for (const auto& other : schema) {
            if (other.name == col.name) {
                throw DataError(fmt::format("{}: duplicate column name '{}'", where, col.name));
            }
        }
        schema.push_back(std::move(col));
    }
    const auto targets = std::count_if(schema.begin(), schema.end(), [](const FeatureSchema& c) {
        return c.role == ColumnRole::target;
    });
    if (targets != 1) {
        throw DataError(fmt::format("{}: expected exactly one target column, found {}",
                                    schema_path.string(), targets));
    }
    for (const auto& c : schema) {
        if (c.role == ColumnRole::target && c.kind != FeatureKind::numeric) {
            throw DataError(fmt::format("{}: target column '{}' must be numeric",
                                        schema_path.string(), c.name));
        }
    }
    return schema;
}

Dataset load_dataset(const std::filesystem::path& data_path,
                     const std::filesystem::path& schema_path, const LoadOptions& options,
                     LoadReport* report) {
    const auto schema = read_schema(schema_path);
    std::ifstream in(data_path);
    if (!in) throw DataError(fmt::format("{}: cannot open data file", data_path.string()));
    const std::string file = data_path.string();

    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_csv(line);
            break;
        }
    }
    if (header.empty()) throw DataError(fmt::format("{}: empty file", file));

    // header position of each schema column
    std::vector<std::size_t> position(schema.size());
    for (std::size_t c = 0; c < schema.size(); ++c) {
        const auto it = std::find(header.begin(), header.end(), schema[c].name);
        if (it == header.end()) {
            throw DataError(fmt::format("{}:{}: column '{}' from schema not found in header", file,
                                        line_no, schema[c].name));
        }
        position[c] = static_cast<std::size_t>(it - header.begin());
    }
    for (const auto& h : header) {
        const bool known = std::any_of(schema.begin(), schema.end(),
                                       [&](const FeatureSchema& c) { return c.name == h; });
        if (!known) {
            throw DataError(
                fmt::format("{}:{}: header column '{}' not described by schema", file, line_no, h));
        }
    }
    if (header.size() != schema.size()) {
        throw DataError(fmt::format("{}:{}: header has {} columns, schema has {}", file, line_no,
                                    header.size(), schema.size()));
    }

    std::vector<FeatureSchema> features;
    std::vector<std::size_t> feature_columns;
    std::size_t target_column = 0;
    for (std::size_t c = 0; c < schema.size(); ++c) {
        if (schema[c].role == ColumnRole::feature) {
            features.push_back(schema[c]);
            feature_columns.push_back(c);
        } else if (schema[c].role == ColumnRole::target) {
            target_column = c;
        }
    }
    std::vector<std::unordered_map<std::string, std::size_t>> level_index(features.size());

    auto is_missing_token = [&](const std::string& s) {
        return std::find(options.missing_tokens.begin(), options.missing_tokens.end(), s) !=
               options.missing_tokens.end();
    };

    std::vector<double> cells;
    std::vector<double> effort;
    LoadReport local;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != header.size()) {
            throw DataError(fmt::format("{}:{}: row has {} fields, header has {}", file, line_no,
                                        fields.size(), header.size()));
        }
        ++local.rows_read;
        const std::string& effort_text = fields[position[target_column]];
        if (is_missing_token(effort_text) || effort_text.empty()) {
            ++local.rows_rejected;
            continue;
        }
        const auto e = parse_number(effort_text);
        if (!e) {
            throw DataError(fmt::format("{}:{}: column '{}': unparseable effort '{}'", file,
                                        line_no, schema[target_column].name, effort_text));
        }
        if (*e <= 0.0) {
            throw DataError(fmt::format("{}:{}: column '{}': non-positive effort {}", file,
                                        line_no, schema[target_column].name, effort_text));
        }
        effort.push_back(*e);
        for (std::size_t j = 0; j < features.size(); ++j) {
            const std::string& text = fields[position[feature_columns[j]]];
            if (is_missing_token(text) || text.empty()) {
                cells.push_back(kMissing);
                continue;
            }
            if (features[j].kind == FeatureKind::numeric) {
                cells.push_back(parse_number(text).value_or(kMissing));
            } else {
                auto [it, inserted] = level_index[j].try_emplace(text, features[j].levels.size());
                if (inserted) features[j].levels.push_back(text);
                cells.push_back(static_cast<double>(it->second));
            }
        }
    }
    if (effort.empty()) throw DataError(fmt::format("{}: empty file (no data rows)", file));
    if (effort.size() < 3) {
        throw DataError(fmt::format("{}: {} usable rows, at least 3 required", file, effort.size()));
    }
    if (report) *report = local;
    return Dataset(std::move(features), schema[target_column], std::move(cells), std::move(effort));
}

void save_dataset(const Dataset& d, const std::filesystem::path& data_path,
                  const std::filesystem::path& schema_path) {
    std::ofstream schema_out(schema_path);
    if (!schema_out) throw DataError(fmt::format("{}: cannot write", schema_path.string()));
    auto schema_line = [](const FeatureSchema& c) {
        std::string line = fmt::format("{},{},{}", quote(c.name), to_string(c.kind), to_string(c.role));
        if (!c.unit.empty()) line += "," + quote(c.unit);
        return line;
    };
    for (const auto& f : d.features()) schema_out << schema_line(f) << '\n';
    schema_out << schema_line(d.target()) << '\n';

    std::ofstream out(data_path);
    if (!out) throw DataError(fmt::format("{}: cannot write", data_path.string()));
    for (const auto& f : d.features()) out << quote(f.name) << ',';
    out << quote(d.target().name) << '\n';
    for (std::size_t r = 0; r < d.rows(); ++r) {
        for (std::size_t j = 0; j < d.feature_count(); ++j) {
            const double v = d.value(r, j);
            if (std::isnan(v)) {
                out << '?';
            } else if (d.feature(j).kind == FeatureKind::categorical) {
                out << quote(d.feature(j).levels[static_cast<std::size_t>(v)]);
            } else {
                out << format_number(v);
            }
            out << ',';
        }
        out << format_number(d.effort(r)) << '\n';
    }
}

// ---------------------------------------------------------------- statistics

StatsReport summary_stats(std::span<const double> effort) {
    StatsReport s;
    s.cases = effort.size();
    if (effort.empty()) return s;
    const auto [lo, hi] = std::minmax_element(effort.begin(), effort.end());
    s.min = *lo;
    s.max = *hi;
    const double n = static_cast<double>(effort.size());
    s.mean = std::accumulate(effort.begin(), effort.end(), 0.0) / n;
    if (effort.size() < 3) return s;
    double m2 = 0.0;
    double m3 = 0.0;
    for (const double x : effort) {
        const double d = x - s.mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if (m2 <= 0.0) return s;
    const double g1 = m3 / std::pow(m2, 1.5);
    s.skewness = std::sqrt(n * (n - 1.0)) / (n - 2.0) * g1;
    return s;
}

StatsReport summary_stats(const Dataset& d) { return summary_stats(d.efforts()); }

// ---------------------------------------------------------------- imputation

Imputer Imputer::fit(const Dataset& train) {
    Imputer imp;
    imp.fill_.assign(train.feature_count(), 0.0);
    for (std::size_t j = 0; j < train.feature_count(); ++j) {
        if (train.feature(j).kind == FeatureKind::numeric) {
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t r = 0; r < train.rows(); ++r) {
                const double v = train.value(r, j);
                if (!std::isnan(v)) {
                    sum += v;
                    ++count;
                }
            }
            imp.fill_[j] = count ? sum / static_cast<double>(count) : 0.0;
        } else {
            std::vector<std::size_t> counts(train.feature(j).levels.size(), 0);
            for (std::size_t r = 0; r < train.rows(); ++r) {
                const double v = train.value(r, j);
                if (!std::isnan(v)) ++counts[static_cast<std::size_t>(v)];
            }
            const auto best = std::max_element(counts.begin(), counts.end());
            imp.fill_[j] = best == counts.end() ? 0.0 : static_cast<double>(best - counts.begin());
        }
    }
    return imp;
}

void Imputer::apply(std::span<double> row) const {
    if (row.size() != fill_.size()) throw DataError("Imputer::apply: row width mismatch");
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (std::isnan(row[j])) row[j] = fill_[j];
    }
}

Dataset Imputer::apply(const Dataset& d) const {
    if (d.feature_count() != fill_.size()) throw DataError("Imputer::apply: schema mismatch");
    if (!d.has_missing()) return d;
    std::vector<double> cells;
    cells.reserve(d.rows() * d.feature_count());
    for (std::size_t r = 0; r < d.rows(); ++r) {
        const auto src = d.row(r);
        const auto start = cells.size();
        cells.insert(cells.end(), src.begin(), src.end());
        apply(std::span<double>(cells.data() + start, src.size()));
    }
    return d.with_cells(std::move(cells));
}

// ---------------------------------------------------------------- scaling

MinMaxScaler MinMaxScaler::fit(const Dataset& train) {
    MinMaxScaler s;
    const std::size_t p = train.feature_count();
    s.scaled_.assign(p, false);
    s.lower_.assign(p, 0.0);
    s.upper_.assign(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        if (train.feature(j).kind != FeatureKind::numeric) continue;
        s.scaled_[j] = true;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < train.rows(); ++r) {
            const double v = train.value(r, j);
            if (std::isnan(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (lo > hi) lo = hi = 0.0;  // all missing
        s.lower_[j] = lo;
        s.upper_[j] = hi;
    }
    return s;
}

double MinMaxScaler::transform(std::size_t j, double x) const {
    if (!scaled_.at(j) || std::isnan(x)) return x;
    const double range = upper_[j] - lower_[j];
    if (range <= 0.0) return 0.0;
    return (x - lower_[j]) / range;
}

double MinMaxScaler::inverse(std::size_t j, double x) const {
    if (!scaled_.at(j) || std::isnan(x)) return x;
    const double range = upper_[j] - lower_[j];
    if (range <= 0.0) return lower_[j];
    return lower_[j] + x * range;
}

Dataset MinMaxScaler::transform(const Dataset& d) const {
    if (d.feature_count() != scaled_.size()) throw DataError("MinMaxScaler: schema mismatch");
    std::vector<double> cells(d.rows() * d.feature_count());
    for (std::size_t r = 0; r < d.rows(); ++r) {
        for (std::size_t j = 0; j < d.feature_count(); ++j) {
            cells[r * d.feature_count() + j] = transform(j, d.value(r, j));
        }
    }
    return d.with_cells(std::move(cells));
}

Dataset MinMaxScaler::inverse(const Dataset& d) const {
    if (d.feature_count() != scaled_.size()) throw DataError("MinMaxScaler: schema mismatch");
    std::vector<double> cells(d.rows() * d.feature_count());
    for (std::size_t r = 0; r < d.rows(); ++r) {
        for (std::size_t j = 0; j < d.feature_count(); ++j) {
            cells[r * d.feature_count() + j] = inverse(j, d.value(r, j));
        }
    }
    return d.with_cells(std::move(cells));
}

NormalizedDataset min_max_normalize(const Dataset& d) {
    auto scaler = MinMaxScaler::fit(d);
    auto data = scaler.transform(d);
    return {std::move(data), std::move(scaler)};
}

Dataset log_transform(const Dataset& d, std::span<const std::string> columns) {
    std::vector<double> cells(d.rows() * d.feature_count());
    for (std::size_t r = 0; r < d.rows(); ++r) {
        const auto src = d.row(r);
        std::copy(src.begin(), src.end(), cells.begin() + static_cast<std::ptrdiff_t>(r * src.size()));
    }
    std::vector<double> effort(d.efforts().begin(), d.efforts().end());
    for (const auto& name : columns) {
        if (name == d.target().name) {
            for (auto& e : effort) e = std::log1p(e);
            continue;
        }
        const auto j = d.find_feature(name);
        if (!j) throw DataError(fmt::format("log_transform: unknown column '{}'", name));
        if (d.feature(*j).kind != FeatureKind::numeric) {
            throw DataError(fmt::format("log_transform: column '{}' is not numeric", name));
        }
        for (std::size_t r = 0; r < d.rows(); ++r) {
            double& v = cells[r * d.feature_count() + *j];
            if (std::isnan(v)) continue;
            if (v < 0.0) {
                throw DataError(
                    fmt::format("log_transform: row {}: column '{}': negative value {}", r, name, v));
            }
            v = std::log1p(v);
        }
    }
    return Dataset(d.features(), d.target(), std::move(cells), std::move(effort));
}

// ---------------------------------------------------------------- folds

std::vector<std::size_t> FoldAssignment::test_rows(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < assignment.size(); ++r) {
        if (assignment[r] == fold) out.push_back(r);
    }
    return out;
}

std::vector<std::size_t> FoldAssignment::train_rows(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < assignment.size(); ++r) {
        if (assignment[r] != fold) out.push_back(r);
    }
    return out;
}

std::size_t FoldAssignment::fold_size(std::size_t fold) const {
    return static_cast<std::size_t>(std::count(assignment.begin(), assignment.end(), fold));
}

FoldAssignment make_folds(std::span<const double> effort, std::size_t k, std::uint64_t seed,
                          std::size_t strata_bins) {
    const std::size_t n = effort.size();
    if (k < 2) throw std::invalid_argument("make_folds: k must be at least 2");
    if (n < k) {
        throw std::invalid_argument(
            fmt::format("make_folds: {} rows cannot be split into {} folds", n, k));
    }
    if (strata_bins == 0) strata_bins = k;
    strata_bins = std::min(strata_bins, n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return effort[a] < effort[b]; });

    FoldAssignment folds;
    folds.k = k;
    folds.seed = seed;
    folds.strata_bins = strata_bins;
    folds.assignment.assign(n, 0);
    folds.stratum.assign(n, 0);

    Rng rng(seed);
    std::size_t deal = 0;
    for (std::size_t b = 0; b < strata_bins; ++b) {
        const std::size_t begin = b * n / strata_bins;
        const std::size_t end = (b + 1) * n / strata_bins;
        std::vector<std::size_t> bin(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
        rng.shuffle(bin);
        for (const std::size_t r : bin) {
            folds.assignment[r] = deal++ % k;
            folds.stratum[r] = b;
        }
    }
    return folds;
}

FoldAssignment make_folds(const Dataset& d, std::size_t k, std::uint64_t seed,
                          std::size_t strata_bins) {
    return make_folds(d.efforts(), k, seed, strata_bins);
}

}  // namespace omt
