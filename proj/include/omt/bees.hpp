#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "omt/dataset.hpp"
#include "omt/model_tree.hpp"
#include "omt/rng.hpp"

namespace omt {

enum class DimensionKind { continuous, integer, boolean };

struct Dimension {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
    DimensionKind kind = DimensionKind::continuous;
};

/// Axis-aligned box; lower < upper on every dimension.
class SearchSpace {
public:
    explicit SearchSpace(std::vector<Dimension> dims);

    std::size_t size() const { return dims_.size(); }
    const Dimension& operator[](std::size_t i) const { return dims_[i]; }
    std::span<const Dimension> dims() const { return dims_; }

    void clamp(std::span<double> position) const;
    bool contains(std::span<const double> position) const;
    std::vector<double> random_position(Rng& rng) const;

private:
    std::vector<Dimension> dims_;
};

/// Bees Algorithm settings; defaults follow the published parameter table
/// with the recruit radius read as a fraction of each dimension's range.
struct BeesConfig {
    std::size_t scouts = 30;          // n
    std::size_t sites = 30;           // s, clamped to n
    std::size_t elite_sites = 20;     // e, clamped to s
    std::size_t elite_recruits = 15;  // nep
    std::size_t other_recruits = 20;  // osp
    double patch_radius = 0.15;       // ngh, fraction of range
    double patch_decay = 0.95;        // multiplicative shrink per iteration
    std::size_t max_iterations = 50;
    /// Stop once an iteration improves the running best by less than this.
    /// 0 disables early stopping.
    double epsilon = 1e-2;

    /// Copy with s clamped to n and e clamped to s.
    BeesConfig normalized() const;
    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct Bee {
    std::vector<double> position;
    double fitness = 0.0;  // lower is better
};

struct TraceRow {
    std::size_t iteration = 0;  // 0 = initial scouts
    double best_fitness = 0.0;
    double patch_radius = 0.0;  // radius used during this iteration
};

struct OptimizationResult {
    Bee best;
    std::vector<TraceRow> trace;
    std::size_t evaluations = 0;
};

using Objective = std::function<double(std::span<const double>)>;

struct OptimizeOptions {
    /// Parallel evaluation workers; results do not depend on this.
    std::size_t workers = 1;
    /// Called once per evaluation, in candidate order, after each batch.
    std::function<void(std::span<const double>, double)> on_evaluate;
};

/// Bees Algorithm minimisation. Returns the best bee over every evaluation
/// and the running-best trace. Non-finite objective values count as +inf.
OptimizationResult optimize(const Objective& objective, const SearchSpace& space,
                            const BeesConfig& cfg, std::uint64_t seed,
                            const OptimizeOptions& options = {});

/// Uniform perturbation of every coordinate by up to ngh * (upper - lower),
/// clamped to the box.
std::vector<double> create_neighborhood_bee(std::span<const double> site, double ngh,
                                            const SearchSpace& space, Rng& rng);

/// Writes `iteration,best_fitness,ngh` rows.
void write_trace(std::ostream& out, std::span<const TraceRow> trace);

// ---------------------------------------------------------------- model-tree tuning

/// C in [2, 30] (integer), P in [0, 1] (threshold 0.5), K in [0, 100],
/// T in [0.0005, 0.5].
SearchSpace model_tree_search_space();

MTParams decode_params(std::span<const double> position);
std::vector<double> encode_params(const MTParams& params);

struct TuneOptions {
    std::size_t workers = 1;
    std::size_t inner_folds = 3;
    std::function<void(std::span<const double>, double)> on_evaluate;
};

struct TuneResult {
    MTParams params;
    ModelTree tree;
    OptimizationResult optimization;
};

/// Mean held-out MMRE of trees built with `params` over fixed inner folds.
double cross_validated_mmre(const Dataset& train, const FoldAssignment& folds,
                            const MTParams& params);

/// Minimises inner-CV MMRE over the model-tree search space and refits a
/// tree on all of `train` with the winning parameters. Needs >= 9 rows.
TuneResult tune_model_tree(const Dataset& train, const BeesConfig& cfg, std::uint64_t seed,
                           const TuneOptions& options = {});

}  // namespace omt
