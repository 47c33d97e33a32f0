#include "omt/model_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace omt {

void MTParams::validate() const {
    if (min_leaf < 2) {
        throw std::invalid_argument(fmt::format("C (min_leaf) must be >= 2, got {}", min_leaf));
    }
    if (!(smoothing >= 0.0) || !std::isfinite(smoothing)) {
        throw std::invalid_argument(fmt::format("K (smoothing) must be >= 0, got {}", smoothing));
    }
    if (!(split_threshold > 0.0 && split_threshold <= 1.0)) {
        throw std::invalid_argument(
            fmt::format("T (split_threshold) must be in (0, 1], got {}", split_threshold));
    }
}

double LinearModel::predict(std::span<const double> instance) const {
    double y = intercept;
    for (const auto& t : terms) y += t.coefficient * instance[t.feature];
    return y;
}

double LinearModel::coefficient(std::size_t feature) const {
    for (const auto& t : terms) {
        if (t.feature == feature) return t.coefficient;
    }
    return 0.0;
}

double compensated_error(double mae, std::size_t n, std::size_t v, double max_factor) {
    if (n <= v) return mae * max_factor;
    const auto nn = static_cast<double>(n);
    const auto vv = static_cast<double>(v);
    return mae * (nn + vv) / (nn - vv);
}

double population_sd(std::span<const double> values) {
    if (values.empty()) return 0.0;
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / n);
}

double sdr_split_score(std::span<const double> targets, std::span<const std::size_t> left) {
    std::vector<bool> in_left(targets.size(), false);
    for (const std::size_t i : left) in_left.at(i) = true;
    std::vector<double> l;
    std::vector<double> r;
    for (std::size_t i = 0; i < targets.size(); ++i) (in_left[i] ? l : r).push_back(targets[i]);
    if (l.empty() || r.empty()) throw std::invalid_argument("sdr_split_score: empty side");
    const double n = static_cast<double>(targets.size());
    return population_sd(targets) - static_cast<double>(l.size()) / n * population_sd(l) -
           static_cast<double>(r.size()) / n * population_sd(r);
}

std::vector<std::size_t> order_categorical_levels(std::span<const std::size_t> level_of_row,
                                                  std::span<const double> targets) {
    if (level_of_row.size() != targets.size()) {
        throw std::invalid_argument("order_categorical_levels: length mismatch");
    }
    std::size_t max_level = 0;
    for (const std::size_t l : level_of_row) max_level = std::max(max_level, l);
    std::vector<double> sum(max_level + 1, 0.0);
    std::vector<std::size_t> count(max_level + 1, 0);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        sum[level_of_row[i]] += targets[i];
        ++count[level_of_row[i]];
    }
    std::vector<std::size_t> levels;
    for (std::size_t l = 0; l <= max_level; ++l) {
        if (count[l] > 0) levels.push_back(l);
    }
    std::stable_sort(levels.begin(), levels.end(), [&](std::size_t a, std::size_t b) {
        return sum[a] / static_cast<double>(count[a]) < sum[b] / static_cast<double>(count[b]);
    });
    return levels;
}

// ---------------------------------------------------------------- linear models

namespace {

// Centered design for one node; subsets of its columns are solved from the
// shared Gram matrix.
struct Design {
    std::vector<std::size_t> features;
    Eigen::MatrixXd xc;
    Eigen::VectorXd yc;
    Eigen::VectorXd x_mean;
    double y_mean = 0.0;
    Eigen::MatrixXd gram;
    Eigen::VectorXd xty;
};

Design make_design(const Dataset& data, std::span<const std::size_t> rows,
                   std::span<const std::size_t> features) {
    Design d;
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = data.effort(rows[static_cast<std::size_t>(i)]);
    d.y_mean = y.mean();
    d.yc = y.array() - d.y_mean;

    std::vector<Eigen::VectorXd> columns;
    for (const std::size_t f : features) {
        Eigen::VectorXd col(n);
        for (Eigen::Index i = 0; i < n; ++i) col[i] = data.value(rows[static_cast<std::size_t>(i)], f);
        const double lo = col.minCoeff();
        const double hi = col.maxCoeff();
        if (!(hi > lo)) continue;  // constant in this node
        d.features.push_back(f);
        columns.push_back(std::move(col));
    }
    const auto p = static_cast<Eigen::Index>(columns.size());
    d.xc.resize(n, p);
    d.x_mean.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto& col = columns[static_cast<std::size_t>(j)];
        d.x_mean[j] = col.mean();
        d.xc.col(j) = col.array() - d.x_mean[j];
    }
    d.gram = d.xc.transpose() * d.xc;
    d.xty = d.xc.transpose() * d.yc;
    return d;
}

struct SubsetFit {
    Eigen::VectorXd beta;
    double mae = 0.0;
    double rmse = 0.0;
};

SubsetFit solve_subset(const Design& d, const std::vector<Eigen::Index>& active) {
    SubsetFit fit;
    const auto n = d.yc.size();
    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::VectorXd residual = d.yc;
    if (k > 0) {
        Eigen::MatrixXd g(k, k);
        Eigen::VectorXd b(k);
        for (Eigen::Index a = 0; a < k; ++a) {
            b[a] = d.xty[active[a]];
            for (Eigen::Index c = 0; c < k; ++c) g(a, c) = d.gram(active[a], active[c]);
            g(a, a) += kRidgeDamping * g(a, a);
        }
        fit.beta = g.ldlt().solve(b);
        if (!fit.beta.allFinite()) {
            fit.beta = g.completeOrthogonalDecomposition().solve(b);
        }
        for (Eigen::Index a = 0; a < k; ++a) residual -= fit.beta[a] * d.xc.col(active[a]);
    }
    fit.mae = n > 0 ? residual.cwiseAbs().mean() : 0.0;
    fit.rmse = n > 0 ? std::sqrt(residual.squaredNorm() / static_cast<double>(n)) : 0.0;
    return fit;
}

LinearModel to_model(const Design& d, const std::vector<Eigen::Index>& active, const SubsetFit& fit,
                     std::size_t n) {
    LinearModel m;
    m.intercept = d.y_mean;
    for (std::size_t a = 0; a < active.size(); ++a) {
        const double coef = fit.beta[static_cast<Eigen::Index>(a)];
        m.terms.push_back({d.features[static_cast<std::size_t>(active[a])], coef});
        m.intercept -= coef * d.x_mean[active[a]];
    }
    std::sort(m.terms.begin(), m.terms.end(),
              [](const LinearTerm& a, const LinearTerm& b) { return a.feature < b.feature; });
    m.training_mae = fit.mae;
    m.training_rmse = fit.rmse;
    m.n_train = n;
    return m;
}

LinearModel mean_model(const Dataset& data, std::span<const std::size_t> rows) {
    LinearModel m;
    m.n_train = rows.size();
    if (rows.empty()) return m;
    double sum = 0.0;
    for (const std::size_t r : rows) sum += data.effort(r);
    m.intercept = sum / static_cast<double>(rows.size());
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (const std::size_t r : rows) {
        const double e = data.effort(r) - m.intercept;
        abs_sum += std::abs(e);
        sq_sum += e * e;
    }
    m.training_mae = abs_sum / static_cast<double>(rows.size());
    m.training_rmse = std::sqrt(sq_sum / static_cast<double>(rows.size()));
    return m;
}

bool constant_target(const Dataset& data, std::span<const std::size_t> rows) {
    for (const std::size_t r : rows) {
        if (data.effort(r) != data.effort(rows.front())) return false;
    }
    return true;
}

}  // namespace

LinearModel fit_least_squares(const Dataset& data, std::span<const std::size_t> rows,
                              std::span<const std::size_t> features) {
    if (rows.empty()) return {};
    if (constant_target(data, rows)) return mean_model(data, rows);
    const Design d = make_design(data, rows, features);
    std::vector<Eigen::Index> active(d.features.size());
    std::iota(active.begin(), active.end(), Eigen::Index{0});
    return to_model(d, active, solve_subset(d, active), rows.size());
}

LinearModel fit_linear_model(const Dataset& data, std::span<const std::size_t> rows,
                             std::span<const std::size_t> features) {
    if (rows.empty()) return {};
    if (constant_target(data, rows)) return mean_model(data, rows);
    const Design d = make_design(data, rows, features);
    const std::size_t n = rows.size();

    std::vector<Eigen::Index> active(d.features.size());
    std::iota(active.begin(), active.end(), Eigen::Index{0});
    SubsetFit current = solve_subset(d, active);
    double current_error = compensated_error(current.mae, n, active.size() + 1);

    while (!active.empty()) {
        // A model with as many parameters as rows interpolates them and has
        // no usable error estimate, so features are dropped until v < n.
        const bool forced = active.size() + 1 >= n;
        std::size_t best_drop = active.size();
        double best_error = forced ? std::numeric_limits<double>::infinity() : current_error;
        SubsetFit best_fit;
        for (std::size_t i = 0; i < active.size(); ++i) {
            std::vector<Eigen::Index> candidate = active;
            candidate.erase(candidate.begin() + static_cast<std::ptrdiff_t>(i));
            SubsetFit fit = solve_subset(d, candidate);
            const double err = compensated_error(fit.mae, n, candidate.size() + 1);
            if (err < best_error) {
                best_error = err;
                best_drop = i;
                best_fit = std::move(fit);
            }
        }
        if (best_drop == active.size()) break;
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_drop));
        current = std::move(best_fit);
        current_error = best_error;
    }
    return to_model(d, active, current, n);
}

// ---------------------------------------------------------------- growing

namespace {

struct SplitChoice {
    bool found = false;
    double score = 0.0;
    std::size_t feature = 0;
    SplitKind kind = SplitKind::none;
    double threshold = 0.0;
    std::vector<std::size_t> left_levels;
    std::vector<std::size_t> right_levels;
};

class Grower {
public:
    Grower(const Dataset& data, const MTParams& params, double global_sd)
        : data_(data), params_(params), global_sd_(global_sd), numeric_(data.numeric_features()) {}

    std::vector<TreeNode> grow(std::vector<std::size_t> rows) {
        grow_node(std::move(rows));
        return std::move(nodes_);
    }

private:
    std::size_t grow_node(std::vector<std::size_t> rows) {
        const std::size_t index = nodes_.size();
        nodes_.emplace_back();
        nodes_[index].coverage = rows.size();
        nodes_[index].model = fit_linear_model(data_, rows, numeric_);

        std::vector<double> targets(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) targets[i] = data_.effort(rows[i]);
        const double sd = population_sd(targets);
        if (rows.size() < 2 * params_.min_leaf || sd <= params_.split_threshold * global_sd_) {
            return index;
        }
        const SplitChoice best = find_split(rows, targets, sd);
        if (!best.found || !(best.score > 0.0)) return index;

        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        for (const std::size_t r : rows) {
            const double v = data_.value(r, best.feature);
            bool left = false;
            if (best.kind == SplitKind::numeric) {
                left = v <= best.threshold;
            } else {
                left = std::binary_search(best.left_levels.begin(), best.left_levels.end(),
                                          static_cast<std::size_t>(v));
            }
            (left ? left_rows : right_rows).push_back(r);
        }
        {
            TreeNode& node = nodes_[index];
            node.split = best.kind;
            node.feature = best.feature;
            node.threshold = best.threshold;
            node.left_levels = best.left_levels;
            node.right_levels = best.right_levels;
        }
        const auto left = static_cast<std::int32_t>(grow_node(std::move(left_rows)));
        const auto right = static_cast<std::int32_t>(grow_node(std::move(right_rows)));
        nodes_[index].left = left;
        nodes_[index].right = right;
        return index;
    }

    SplitChoice find_split(const std::vector<std::size_t>& rows, const std::vector<double>& targets,
                           double sd) const {
        SplitChoice best;
        best.score = -std::numeric_limits<double>::infinity();
        const std::size_t n = rows.size();
        const double nn = static_cast<double>(n);
        const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / nn;
        const std::size_t c = params_.min_leaf;

        auto side_sd = [](double s1, double s2, double count) {
            const double m = s1 / count;
            return std::sqrt(std::max(0.0, s2 / count - m * m));
        };

        std::vector<std::size_t> order(n);
        for (std::size_t f = 0; f < data_.feature_count(); ++f) {
            if (data_.feature(f).kind == FeatureKind::numeric) {
                std::iota(order.begin(), order.end(), std::size_t{0});
                std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                    return data_.value(rows[a], f) < data_.value(rows[b], f);
                });
                double total1 = 0.0;
                double total2 = 0.0;
                for (const std::size_t i : order) {
                    const double t = targets[i] - mean;
                    total1 += t;
                    total2 += t * t;
                }
                double s1 = 0.0;
                double s2 = 0.0;
                for (std::size_t i = 0; i + 1 < n; ++i) {
                    const double t = targets[order[i]] - mean;
                    s1 += t;
                    s2 += t * t;
                    const std::size_t left_n = i + 1;
                    if (left_n < c || n - left_n < c) continue;
                    const double lo = data_.value(rows[order[i]], f);
                    const double hi = data_.value(rows[order[i + 1]], f);
                    if (!(lo < hi)) continue;
                    const double ln = static_cast<double>(left_n);
                    const double rn = nn - ln;
                    const double score = sd - ln / nn * side_sd(s1, s2, ln) -
                                         rn / nn * side_sd(total1 - s1, total2 - s2, rn);
                    if (score > best.score) {
                        double threshold = 0.5 * (lo + hi);
                        if (!(threshold < hi)) threshold = lo;
                        best.found = true;
                        best.score = score;
                        best.feature = f;
                        best.kind = SplitKind::numeric;
                        best.threshold = threshold;
                        best.left_levels.clear();
                        best.right_levels.clear();
                    }
                }
            } else {
                std::vector<std::size_t> levels(n);
                for (std::size_t i = 0; i < n; ++i) {
                    levels[i] = static_cast<std::size_t>(data_.value(rows[i], f));
                }
                const auto ordered = order_categorical_levels(levels, targets);
                if (ordered.size() < 2) continue;
                const std::size_t width = data_.feature(f).levels.size();
                std::vector<double> lv_s1(width, 0.0);
                std::vector<double> lv_s2(width, 0.0);
                std::vector<std::size_t> lv_n(width, 0);
                double total1 = 0.0;
                double total2 = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double t = targets[i] - mean;
                    lv_s1[levels[i]] += t;
                    lv_s2[levels[i]] += t * t;
                    ++lv_n[levels[i]];
                    total1 += t;
                    total2 += t * t;
                }
                double s1 = 0.0;
                double s2 = 0.0;
                std::size_t left_n = 0;
                for (std::size_t m = 0; m + 1 < ordered.size(); ++m) {
                    const std::size_t l = ordered[m];
                    s1 += lv_s1[l];
                    s2 += lv_s2[l];
                    left_n += lv_n[l];
                    if (left_n < c || n - left_n < c) continue;
                    const double ln = static_cast<double>(left_n);
                    const double rn = nn - ln;
                    const double score = sd - ln / nn * side_sd(s1, s2, ln) -
                                         rn / nn * side_sd(total1 - s1, total2 - s2, rn);
                    if (score > best.score) {
                        best.found = true;
                        best.score = score;
                        best.feature = f;
                        best.kind = SplitKind::categorical;
                        best.threshold = static_cast<double>(m + 1);
                        best.left_levels.assign(ordered.begin(),
                                                ordered.begin() + static_cast<std::ptrdiff_t>(m + 1));
                        best.right_levels.assign(ordered.begin() + static_cast<std::ptrdiff_t>(m + 1),
                                                 ordered.end());
                        std::sort(best.left_levels.begin(), best.left_levels.end());
                        std::sort(best.right_levels.begin(), best.right_levels.end());
                    }
                }
            }
        }
        return best;
    }

    const Dataset& data_;
    const MTParams& params_;
    double global_sd_;
    std::vector<std::size_t> numeric_;
    std::vector<TreeNode> nodes_;
};

// Copies the subtree reachable from the root into a fresh array in
// preorder so children follow parents.
std::vector<TreeNode> compact(const std::vector<TreeNode>& nodes) {
    std::vector<TreeNode> out;
    out.reserve(nodes.size());
    auto visit = [&](auto&& self, std::size_t i) -> std::int32_t {
        const auto index = static_cast<std::int32_t>(out.size());
        out.push_back(nodes[i]);
        if (!nodes[i].is_leaf()) {
            const auto l = self(self, static_cast<std::size_t>(nodes[i].left));
            const auto r = self(self, static_cast<std::size_t>(nodes[i].right));
            out[static_cast<std::size_t>(index)].left = l;
            out[static_cast<std::size_t>(index)].right = r;
        }
        return index;
    };
    if (!nodes.empty()) visit(visit, 0);
    return out;
}

}  // namespace

ModelTree build_tree(const Dataset& train, const MTParams& params) {
    params.validate();
    if (train.rows() == 0) throw std::invalid_argument("build_tree: empty training set");
    ModelTree tree;
    tree.params_ = params;
    tree.features_ = train.features();
    tree.imputer_ = Imputer::fit(train);
    const Dataset data = tree.imputer_.apply(train);
    tree.global_sd_ = population_sd(data.efforts());

    std::vector<std::size_t> rows(data.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Grower grower(data, params, tree.global_sd_);
    tree.nodes_ = grower.grow(std::move(rows));
    if (params.prune) return prune_tree(tree, data);
    return tree;
}

ModelTree prune_tree(const ModelTree& tree, const Dataset& train) {
    if (tree.nodes_.empty()) return tree;
    if (train.feature_count() != tree.features_.size()) {
        throw std::invalid_argument("prune_tree: training data does not match the tree schema");
    }
    const Dataset data = tree.imputer_.apply(train);
    const std::size_t count = tree.nodes_.size();

    // Absolute residual of each node's own model over the rows routed through it.
    std::vector<double> abs_error(count, 0.0);
    std::vector<std::size_t> reached(count, 0);
    for (std::size_t r = 0; r < data.rows(); ++r) {
        const auto x = data.row(r);
        std::size_t i = 0;
        for (;;) {
            const TreeNode& node = tree.nodes_[i];
            abs_error[i] += std::abs(data.effort(r) - node.model.predict(x));
            ++reached[i];
            if (node.is_leaf()) break;
            i = tree.child_for(node, x);
        }
    }

    std::vector<TreeNode> nodes = tree.nodes_;
    const double negligible = kNegligibleError * tree.global_sd_;
    struct Subtree {
        double abs_error = 0.0;  // summed over the rows reaching the node
        std::size_t params = 0;
    };
    // Post-order. The subtree estimate compensates its MAE with the
    // parameter count of all its leaf models plus one per split.
    auto prune = [&](auto&& self, std::size_t i) -> Subtree {
        const Subtree own{abs_error[i], nodes[i].model.parameter_count()};
        if (nodes[i].is_leaf()) return own;
        const Subtree l = self(self, static_cast<std::size_t>(nodes[i].left));
        const Subtree r = self(self, static_cast<std::size_t>(nodes[i].right));
        const Subtree sub{l.abs_error + r.abs_error, l.params + r.params + 1};
        const std::size_t n = reached[i];
        const double scale = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
        const double own_estimate = compensated_error(own.abs_error * scale, n, own.params);
        const double sub_estimate = compensated_error(sub.abs_error * scale, n, sub.params);
        if (own_estimate <= sub_estimate || own_estimate < negligible) {
            TreeNode& node = nodes[i];
            node.split = SplitKind::none;
            node.left = node.right = -1;
            node.left_levels.clear();
            node.right_levels.clear();
            node.threshold = 0.0;
            node.feature = 0;
            return own;
        }
        return sub;
    };
    prune(prune, 0);

    ModelTree out = tree;
    out.nodes_ = compact(nodes);
    return out;
}

// ---------------------------------------------------------------- prediction

std::vector<double> ModelTree::prepare(std::span<const double> instance) const {
    if (instance.size() != features_.size()) {
        throw std::invalid_argument(fmt::format("instance has {} values, tree expects {}",
                                                instance.size(), features_.size()));
    }
    std::vector<double> x(instance.begin(), instance.end());
    imputer_.apply(x);
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (!std::isfinite(x[j])) {
            throw std::invalid_argument(
                fmt::format("instance value for '{}' is not finite", features_[j].name));
        }
    }
    return x;
}

std::size_t ModelTree::child_for(const TreeNode& node, std::span<const double> x) const {
    const double v = x[node.feature];
    if (node.split == SplitKind::numeric) {
        return static_cast<std::size_t>(v <= node.threshold ? node.left : node.right);
    }
    const auto level = static_cast<std::size_t>(v);
    if (std::binary_search(node.left_levels.begin(), node.left_levels.end(), level)) {
        return static_cast<std::size_t>(node.left);
    }
    if (std::binary_search(node.right_levels.begin(), node.right_levels.end(), level)) {
        return static_cast<std::size_t>(node.right);
    }
    // level unseen at this node: follow the better-covered branch
    const auto& l = nodes_[static_cast<std::size_t>(node.left)];
    const auto& r = nodes_[static_cast<std::size_t>(node.right)];
    return static_cast<std::size_t>(r.coverage > l.coverage ? node.right : node.left);
}

std::vector<std::size_t> ModelTree::path(std::span<const double> instance) const {
    const auto x = prepare(instance);
    std::vector<std::size_t> out{0};
    while (!nodes_[out.back()].is_leaf()) out.push_back(child_for(nodes_[out.back()], x));
    return out;
}

std::size_t ModelTree::route(std::span<const double> instance) const { return path(instance).back(); }

double ModelTree::node_output(std::size_t node, std::span<const double> instance) const {
    return nodes_.at(node).model.predict(prepare(instance));
}

double ModelTree::predict_prepared(std::span<const double> x) const {
    std::vector<std::size_t> trail{0};
    while (!nodes_[trail.back()].is_leaf()) trail.push_back(child_for(nodes_[trail.back()], x));
    double p = nodes_[trail.back()].model.predict(x);
    const double k = params_.smoothing;
    if (k == 0.0) return p;
    // p' = (n p + K q) / (n + K), n = coverage of the child on the path
    for (std::size_t d = trail.size() - 1; d > 0; --d) {
        const double n = static_cast<double>(nodes_[trail[d]].coverage);
        const double q = nodes_[trail[d - 1]].model.predict(x);
        p = (n * p + k * q) / (n + k);
    }
    return p;
}

double ModelTree::predict(std::span<const double> instance) const {
    if (nodes_.empty()) throw std::logic_error("ModelTree::predict on an empty tree");
    return predict_prepared(prepare(instance));
}

double ModelTree::predict(const Dataset& data, std::size_t row) const { return predict(data.row(row)); }

std::vector<double> ModelTree::predict(const Dataset& data) const {
    std::vector<double> out(data.rows());
    for (std::size_t r = 0; r < data.rows(); ++r) out[r] = predict(data.row(r));
    return out;
}

ModelTree ModelTree::with_smoothing(double k) const {
    MTParams p = params_;
    p.smoothing = k;
    p.validate();
    ModelTree out = *this;
    out.params_ = p;
    return out;
}

std::size_t ModelTree::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t ModelTree::depth() const {
    if (nodes_.empty()) return 0;
    std::vector<std::size_t> level(nodes_.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        deepest = std::max(deepest, level[i]);
        if (!nodes_[i].is_leaf()) {
            level[static_cast<std::size_t>(nodes_[i].left)] = level[i] + 1;
            level[static_cast<std::size_t>(nodes_[i].right)] = level[i] + 1;
        }
    }
    return deepest;
}

std::string ModelTree::to_string() const {
    std::string out;
    std::size_t leaf_number = 0;
    auto equation = [&](const LinearModel& m) {
        std::string s = fmt::format("y = {:.6g}", m.intercept);
        for (const auto& t : m.terms) {
            s += fmt::format(" {} {:.6g}*{}", t.coefficient < 0 ? '-' : '+', std::abs(t.coefficient),
                             features_[t.feature].name);
        }
        return s;
    };
    auto level_names = [&](const TreeNode& node, const std::vector<std::size_t>& levels) {
        std::string s;
        for (const std::size_t l : levels) {
            if (!s.empty()) s += ", ";
            s += features_[node.feature].levels.at(l);
        }
        return s;
    };
    auto visit = [&](auto&& self, std::size_t i, std::size_t indent) -> void {
        const TreeNode& node = nodes_[i];
        out.append(2 * indent, ' ');
        if (node.is_leaf()) {
            out += fmt::format("LM {}: {}  (n={})\n", ++leaf_number, equation(node.model), node.coverage);
            return;
        }
        const auto& name = features_[node.feature].name;
        if (node.split == SplitKind::numeric) {
            out += fmt::format("{} <= {:.6g}  (n={})\n", name, node.threshold, node.coverage);
        } else {
            out += fmt::format("{} in {{{}}}  (n={})\n", name, level_names(node, node.left_levels),
                               node.coverage);
        }
        self(self, static_cast<std::size_t>(node.left), indent + 1);
        self(self, static_cast<std::size_t>(node.right), indent + 1);
    };
    if (!nodes_.empty()) visit(visit, 0, 0);
    return out;
}

}  // namespace omt
