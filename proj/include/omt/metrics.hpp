#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace omt {

struct Prediction {
    double actual = 0.0;     // > 0
    double predicted = 0.0;
    bool operator==(const Prediction&) const = default;
};

using PredictionSet = std::vector<Prediction>;

/// |actual - predicted| / actual. Throws std::invalid_argument if actual <= 0.
double mre(double actual, double predicted);

/// Mean MRE in percent.
double mmre(std::span<const Prediction> p);
/// Median MRE in percent; even counts average the two central values.
double mdmre(std::span<const Prediction> p);
/// Percentage of pairs whose MRE is strictly below `level`.
double pred(std::span<const Prediction> p, double level = 0.25);
/// |actual - predicted| per pair, order preserved.
std::vector<double> abs_residuals(std::span<const Prediction> p);

struct SignificanceResult {
    double statistic = 0.0;  // rank sum of the first sample
    double p_value = 1.0;
    double alpha = 0.05;
    bool significant = false;
    bool exact = false;      // exact enumeration rather than normal approximation
};

/// Two-sided Wilcoxon rank-sum test with mid-ranks for ties. Exact
/// enumeration when |a| + |b| <= 10 and there are no ties, otherwise the
/// normal approximation with continuity correction and tie-corrected
/// variance. Both samples need at least 3 values.
SignificanceResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                                     double alpha = 0.05);

}  // namespace omt
