#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "omt/dataset.hpp"

namespace omt {

/// Model-tree hyperparameters.
struct MTParams {
    std::size_t min_leaf = 4;        // C: minimum rows per leaf, >= 2
    bool prune = true;               // P
    double smoothing = 15.0;         // K: >= 0, 0 disables smoothing
    double split_threshold = 0.05;   // T: fraction of the global target sd, in (0, 1]

    /// Throws std::invalid_argument naming the offending parameter.
    void validate() const;
    bool operator==(const MTParams&) const = default;
};

/// Compensation factor applied when a node has no more rows than model
/// parameters.
inline constexpr double kMaxCompensation = 10.0;

/// A node whose own error estimate is below this fraction of the global
/// target sd is always collapsed during pruning.
inline constexpr double kNegligibleError = 1e-5;

/// Relative ridge damping added to the diagonal of the normal equations.
inline constexpr double kRidgeDamping = 1e-8;

struct LinearTerm {
    std::size_t feature = 0;  // index into the dataset's feature list
    double coefficient = 0.0;
    bool operator==(const LinearTerm&) const = default;
};

struct LinearModel {
    double intercept = 0.0;
    std::vector<LinearTerm> terms;  // numeric features only, ascending index
    double training_rmse = 0.0;
    double training_mae = 0.0;
    std::size_t n_train = 0;

    double predict(std::span<const double> instance) const;
    /// Number of fitted parameters (terms plus intercept).
    std::size_t parameter_count() const { return terms.size() + 1; }
    /// Coefficient of a feature, 0 when the model does not use it.
    double coefficient(std::size_t feature) const;
};

/// MAE * (n + v) / (n - v), with the factor replaced by kMaxCompensation
/// when n <= v.
double compensated_error(double mae, std::size_t n, std::size_t v,
                         double max_factor = kMaxCompensation);

/// Population standard deviation.
double population_sd(std::span<const double> values);

/// Standard-deviation reduction of splitting `targets` into the rows listed
/// in `left` and the rest. Throws std::invalid_argument if a side is empty.
double sdr_split_score(std::span<const double> targets, std::span<const std::size_t> left);

/// Levels present in `level_of_row` sorted by ascending mean target (ties
/// by level index). Candidate categorical splits are the prefixes of this
/// order.
std::vector<std::size_t> order_categorical_levels(std::span<const std::size_t> level_of_row,
                                                  std::span<const double> targets);

/// Least-squares fit on the given rows and numeric features followed by
/// greedy attribute dropping on the compensated error. Rows must not
/// contain missing values in the listed features.
LinearModel fit_linear_model(const Dataset& data, std::span<const std::size_t> rows,
                             std::span<const std::size_t> features);

/// Plain least squares (ridge-damped, no attribute dropping).
LinearModel fit_least_squares(const Dataset& data, std::span<const std::size_t> rows,
                              std::span<const std::size_t> features);

enum class SplitKind { none, numeric, categorical };

struct TreeNode {
    std::size_t coverage = 0;
    LinearModel model;
    SplitKind split = SplitKind::none;
    std::size_t feature = 0;
    double threshold = 0.0;                   // numeric: value <= threshold goes left
    std::vector<std::size_t> left_levels;     // categorical: sorted level indices
    std::vector<std::size_t> right_levels;
    std::int32_t left = -1;
    std::int32_t right = -1;

    bool is_leaf() const { return split == SplitKind::none; }
};

/// Binary model tree. Node 0 is the root; children always follow their
/// parent in the node array. Immutable once built; predict is thread-safe.
class ModelTree {
public:
    ModelTree() = default;

    /// Prediction for a record laid out in the training schema's feature
    /// order; NaN cells are imputed with training-split statistics.
    double predict(std::span<const double> instance) const;
    double predict(const Dataset& data, std::size_t row) const;
    std::vector<double> predict(const Dataset& data) const;

    /// Leaf reached by the instance (after imputation).
    std::size_t route(std::span<const double> instance) const;
    /// Root-to-leaf node indices for the instance.
    std::vector<std::size_t> path(std::span<const double> instance) const;
    /// Output of a node's own linear model for the instance.
    double node_output(std::size_t node, std::span<const double> instance) const;

    /// Same structure and models with a different smoothing coefficient.
    ModelTree with_smoothing(double k) const;

    const MTParams& params() const { return params_; }
    double global_sd() const { return global_sd_; }
    std::span<const TreeNode> nodes() const { return nodes_; }
    const TreeNode& root() const { return nodes_.front(); }
    const std::vector<FeatureSchema>& features() const { return features_; }
    std::size_t leaf_count() const;
    std::size_t depth() const;

    /// Indented text form: `feature <= threshold` / `feature in {levels}` for
    /// inner nodes (left child printed first), `LM k: y = ...` for leaves.
    std::string to_string() const;

private:
    friend ModelTree build_tree(const Dataset&, const MTParams&);
    friend ModelTree prune_tree(const ModelTree&, const Dataset&);

    std::vector<double> prepare(std::span<const double> instance) const;
    std::size_t child_for(const TreeNode& node, std::span<const double> instance) const;
    double predict_prepared(std::span<const double> instance) const;

    std::vector<FeatureSchema> features_;
    Imputer imputer_;
    std::vector<TreeNode> nodes_;
    double global_sd_ = 0.0;
    MTParams params_;
};

/// Grows a tree by standard-deviation reduction, fits a linear model at
/// every node, and prunes when params.prune is set.
ModelTree build_tree(const Dataset& train, const MTParams& params);

/// Bottom-up pruning on compensated error. An inner node becomes a leaf when
/// its own model's estimate MAE * (n + v) / (n - v) is no worse than the
/// subtree's, where the subtree's MAE is taken over the same rows and its v
/// counts every leaf model parameter plus one per split. `train` must be the
/// data the tree was built on.
ModelTree prune_tree(const ModelTree& tree, const Dataset& train);

}  // namespace omt
