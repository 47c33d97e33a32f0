#include "omt/bees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "omt/metrics.hpp"
#include "omt/parallel.hpp"

namespace omt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

SearchSpace::SearchSpace(std::vector<Dimension> dims) : dims_(std::move(dims)) {
    for (const auto& d : dims_) {
        if (!(d.lower < d.upper)) {
            throw std::invalid_argument(
                fmt::format("search space dimension '{}': lower {} must be < upper {}", d.name,
                            d.lower, d.upper));
        }
    }
}

void SearchSpace::clamp(std::span<double> position) const {
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        position[i] = std::clamp(position[i], dims_[i].lower, dims_[i].upper);
    }
}

bool SearchSpace::contains(std::span<const double> position) const {
    if (position.size() != dims_.size()) return false;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (!(position[i] >= dims_[i].lower && position[i] <= dims_[i].upper)) return false;
    }
    return true;
}

std::vector<double> SearchSpace::random_position(Rng& rng) const {
    std::vector<double> x(dims_.size());
    for (std::size_t i = 0; i < dims_.size(); ++i) x[i] = rng.uniform(dims_[i].lower, dims_[i].upper);
    return x;
}

BeesConfig BeesConfig::normalized() const {
    BeesConfig c = *this;
    c.sites = std::min(c.sites, c.scouts);
    c.elite_sites = std::min(c.elite_sites, c.sites);
    return c;
}

void BeesConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (scouts < 1) fail("scouts (n) must be >= 1");
    if (sites > scouts) fail(fmt::format("sites (s={}) must not exceed scouts (n={})", sites, scouts));
    if (elite_sites > sites) {
        fail(fmt::format("elite sites (e={}) must not exceed sites (s={})", elite_sites, sites));
    }
    if (elite_recruits < 1) fail("elite recruits (nep) must be >= 1");
    if (other_recruits < 1) fail("other recruits (osp) must be >= 1");
    if (!(patch_radius > 0.0 && patch_radius <= 1.0)) {
        fail(fmt::format("patch radius (ngh) must be in (0, 1], got {}", patch_radius));
    }
    if (!(patch_decay > 0.0 && patch_decay <= 1.0)) {
        fail(fmt::format("patch decay must be in (0, 1], got {}", patch_decay));
    }
    if (!(epsilon >= 0.0)) fail(fmt::format("epsilon must be >= 0, got {}", epsilon));
}

std::vector<double> create_neighborhood_bee(std::span<const double> site, double ngh,
                                            const SearchSpace& space, Rng& rng) {
    std::vector<double> x(site.begin(), site.end());
    for (std::size_t i = 0; i < space.size(); ++i) {
        const double range = space[i].upper - space[i].lower;
        x[i] += rng.uniform(-ngh, ngh) * range;
    }
    space.clamp(x);
    return x;
}

OptimizationResult optimize(const Objective& objective, const SearchSpace& space,
                            const BeesConfig& config, std::uint64_t seed,
                            const OptimizeOptions& options) {
    const BeesConfig cfg = config.normalized();
    cfg.validate();
    Rng rng(seed);
    OptimizationResult result;
    result.best.fitness = kInf;

    auto evaluate = [&](const std::vector<std::vector<double>>& positions) {
        std::vector<double> fitness(positions.size(), kInf);
        parallel_for(positions.size(), options.workers, [&](std::size_t i) {
            const double f = objective(positions[i]);
            fitness[i] = std::isfinite(f) ? f : kInf;
        });
        for (std::size_t i = 0; i < positions.size(); ++i) {
            ++result.evaluations;
            if (options.on_evaluate) options.on_evaluate(positions[i], fitness[i]);
            if (result.best.position.empty() || fitness[i] < result.best.fitness) {
                result.best = {positions[i], fitness[i]};
            }
        }
        return fitness;
    };

    std::vector<Bee> population;
    {
        std::vector<std::vector<double>> positions;
        for (std::size_t i = 0; i < cfg.scouts; ++i) positions.push_back(space.random_position(rng));
        const auto fitness = evaluate(positions);
        for (std::size_t i = 0; i < positions.size(); ++i) {
            population.push_back({std::move(positions[i]), fitness[i]});
        }
    }
    double ngh = cfg.patch_radius;
    result.trace.push_back({0, result.best.fitness, ngh});

    for (std::size_t iteration = 1; iteration <= cfg.max_iterations; ++iteration) {
        const double previous_best = result.best.fitness;
        std::stable_sort(population.begin(), population.end(),
                         [](const Bee& a, const Bee& b) { return a.fitness < b.fitness; });
        ngh *= cfg.patch_decay;

        // Generate every candidate of the iteration first so the random
        // stream, and therefore the result, is independent of evaluation order.
        std::vector<std::vector<double>> candidates;
        std::vector<std::size_t> patch_begin;
        for (std::size_t site = 0; site < cfg.sites; ++site) {
            patch_begin.push_back(candidates.size());
            const std::size_t recruits = site < cfg.elite_sites ? cfg.elite_recruits : cfg.other_recruits;
            for (std::size_t j = 0; j < recruits; ++j) {
                candidates.push_back(create_neighborhood_bee(population[site].position, ngh, space, rng));
            }
        }
        const std::size_t scouts_begin = candidates.size();
        patch_begin.push_back(scouts_begin);
        for (std::size_t j = cfg.sites; j < cfg.scouts; ++j) {
            candidates.push_back(space.random_position(rng));
        }
        const auto fitness = evaluate(candidates);

        std::vector<Bee> next;
        next.reserve(cfg.scouts);
        for (std::size_t site = 0; site < cfg.sites; ++site) {
            Bee winner = population[site];
            for (std::size_t c = patch_begin[site]; c < patch_begin[site + 1]; ++c) {
                if (fitness[c] < winner.fitness) winner = {candidates[c], fitness[c]};
            }
            next.push_back(std::move(winner));
        }
        for (std::size_t c = scouts_begin; c < candidates.size(); ++c) {
            next.push_back({std::move(candidates[c]), fitness[c]});
        }
        population = std::move(next);

        result.trace.push_back({iteration, result.best.fitness, ngh});
        if (cfg.epsilon > 0.0 && previous_best - result.best.fitness < cfg.epsilon) break;
    }
    return result;
}

void write_trace(std::ostream& out, std::span<const TraceRow> trace) {
    out << "iteration,best_fitness,ngh\n";
    for (const auto& row : trace) {
        out << fmt::format("{},{:.4g},{:.4g}\n", row.iteration, row.best_fitness, row.patch_radius);
    }
}

// ---------------------------------------------------------------- model-tree tuning

SearchSpace model_tree_search_space() {
    return SearchSpace({
        {"C", 2.0, 30.0, DimensionKind::integer},
        {"P", 0.0, 1.0, DimensionKind::boolean},
        {"K", 0.0, 100.0, DimensionKind::continuous},
        {"T", 0.0005, 0.5, DimensionKind::continuous},
    });
}

MTParams decode_params(std::span<const double> position) {
    if (position.size() != 4) {
        throw std::invalid_argument(
            fmt::format("decode_params: expected 4 coordinates, got {}", position.size()));
    }
    MTParams p;
    p.min_leaf = static_cast<std::size_t>(std::max(2.0, std::round(position[0])));
    p.prune = position[1] >= 0.5;
    p.smoothing = std::max(0.0, position[2]);
    p.split_threshold = std::clamp(position[3], 0.0005, 1.0);
    return p;
}

std::vector<double> encode_params(const MTParams& params) {
    return {static_cast<double>(params.min_leaf), params.prune ? 1.0 : 0.0, params.smoothing,
            params.split_threshold};
}

namespace {

struct InnerFolds {
    std::vector<Dataset> train;
    std::vector<Dataset> test;
};

InnerFolds split_folds(const Dataset& data, const FoldAssignment& folds) {
    InnerFolds out;
    for (std::size_t f = 0; f < folds.k; ++f) {
        out.train.push_back(data.subset(folds.train_rows(f)));
        out.test.push_back(data.subset(folds.test_rows(f)));
    }
    return out;
}

double inner_mmre(const InnerFolds& folds, const MTParams& params) {
    double total = 0.0;
    PredictionSet pairs;
    for (std::size_t f = 0; f < folds.train.size(); ++f) {
        const ModelTree tree = build_tree(folds.train[f], params);
        const Dataset& test = folds.test[f];
        pairs.clear();
        for (std::size_t r = 0; r < test.rows(); ++r) pairs.push_back({test.effort(r), tree.predict(test, r)});
        total += mmre(pairs);
    }
    return total / static_cast<double>(folds.train.size());
}

}  // namespace

double cross_validated_mmre(const Dataset& train, const FoldAssignment& folds,
                            const MTParams& params) {
    return inner_mmre(split_folds(train, folds), params);
}

TuneResult tune_model_tree(const Dataset& train, const BeesConfig& cfg, std::uint64_t seed,
                           const TuneOptions& options) {
    if (train.rows() < 3 * options.inner_folds) {
        throw std::invalid_argument(fmt::format(
            "tune_model_tree: {} training rows, at least {} needed for inner {}-fold CV",
            train.rows(), 3 * options.inner_folds, options.inner_folds));
    }
    const FoldAssignment folds = make_folds(train, options.inner_folds, seed);
    const InnerFolds inner = split_folds(train, folds);
    const SearchSpace space = model_tree_search_space();

    const Objective objective = [&](std::span<const double> position) {
        try {
            return inner_mmre(inner, decode_params(position));
        } catch (const std::exception&) {
            return kInf;
        }
    };
    OptimizeOptions opt;
    opt.workers = options.workers;
    opt.on_evaluate = options.on_evaluate;

    TuneResult result;
    result.optimization = optimize(objective, space, cfg, mix_seed(seed, 0xbee5), opt);
    result.params = decode_params(result.optimization.best.position);
    result.tree = build_tree(train, result.params);
    return result;
}

}  // namespace omt
