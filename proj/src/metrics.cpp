#include "omt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace omt {

namespace {

void require_non_empty(std::span<const Prediction> p, const char* what) {
    if (p.empty()) throw std::invalid_argument(fmt::format("{}: empty prediction set", what));
}

std::vector<double> mres(std::span<const Prediction> p) {
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = mre(p[i].actual, p[i].predicted);
    return out;
}

// Number of size-n1 subsets of {1..N} per attainable rank sum.
std::vector<double> rank_sum_counts(std::size_t n1, std::size_t total) {
    const std::size_t max_sum = total * (total + 1) / 2;
    // counts[k][s]: subsets of size k with sum s over the ranks seen so far
    std::vector<std::vector<double>> counts(n1 + 1, std::vector<double>(max_sum + 1, 0.0));
    counts[0][0] = 1.0;
    for (std::size_t rank = 1; rank <= total; ++rank) {
        for (std::size_t k = std::min(rank, n1); k >= 1; --k) {
            for (std::size_t s = max_sum; s >= rank; --s) counts[k][s] += counts[k - 1][s - rank];
        }
    }
    return counts[n1];
}

}  // namespace

double mre(double actual, double predicted) {
    if (!(actual > 0.0)) {
        throw std::invalid_argument(fmt::format("mre: actual must be positive, got {}", actual));
    }
    return std::abs(actual - predicted) / actual;
}

double mmre(std::span<const Prediction> p) {
    require_non_empty(p, "mmre");
    const auto m = mres(p);
    return 100.0 * std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size());
}

double mdmre(std::span<const Prediction> p) {
    require_non_empty(p, "mdmre");
    auto m = mres(p);
    std::sort(m.begin(), m.end());
    const std::size_t n = m.size();
    const double median = n % 2 ? m[n / 2] : 0.5 * (m[n / 2 - 1] + m[n / 2]);
    return 100.0 * median;
}

double pred(std::span<const Prediction> p, double level) {
    require_non_empty(p, "pred");
    const auto m = mres(p);
    const auto hits = std::count_if(m.begin(), m.end(), [&](double x) { return x < level; });
    return 100.0 * static_cast<double>(hits) / static_cast<double>(m.size());
}

std::vector<double> abs_residuals(std::span<const Prediction> p) {
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::abs(p[i].actual - p[i].predicted);
    return out;
}

SignificanceResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                                     double alpha) {
    if (a.size() < 3 || b.size() < 3) {
        throw std::invalid_argument(fmt::format(
            "wilcoxon_rank_sum: sample too small ({} and {}, need >= 3 each)", a.size(), b.size()));
    }
    const std::size_t n1 = a.size();
    const std::size_t n2 = b.size();
    const std::size_t total = n1 + n2;

    std::vector<std::pair<double, std::size_t>> pooled;  // (value, sample 0/1)
    pooled.reserve(total);
    for (const double x : a) pooled.emplace_back(x, 0);
    for (const double x : b) pooled.emplace_back(x, 1);
    std::stable_sort(pooled.begin(), pooled.end(),
                     [](const auto& l, const auto& r) { return l.first < r.first; });

    double rank_sum = 0.0;
    double tie_term = 0.0;  // sum of t^3 - t over tie groups
    for (std::size_t i = 0; i < total;) {
        std::size_t j = i;
        while (j < total && pooled[j].first == pooled[i].first) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        for (std::size_t k = i; k < j; ++k) {
            if (pooled[k].second == 0) rank_sum += mid_rank;
        }
        i = j;
    }

    SignificanceResult result;
    result.statistic = rank_sum;
    result.alpha = alpha;
    const double dn1 = static_cast<double>(n1);
    const double dn2 = static_cast<double>(n2);
    const double dn = static_cast<double>(total);
    const double mean = dn1 * (dn + 1.0) / 2.0;

    if (total <= 10 && tie_term == 0.0) {
        const auto counts = rank_sum_counts(n1, total);
        const double all = std::accumulate(counts.begin(), counts.end(), 0.0);
        const auto w = static_cast<std::size_t>(rank_sum);
        double lower = 0.0;
        double upper = 0.0;
        for (std::size_t s = 0; s < counts.size(); ++s) {
            if (s <= w) lower += counts[s];
            if (s >= w) upper += counts[s];
        }
        result.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
        result.exact = true;
    } else {
        const double variance = dn1 * dn2 / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
        if (variance <= 0.0) {
            result.p_value = 1.0;
        } else {
            const double z = std::max(0.0, std::abs(rank_sum - mean) - 0.5) / std::sqrt(variance);
            result.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
        }
    }
    result.significant = result.p_value < alpha;
    return result;
}

}  // namespace omt
