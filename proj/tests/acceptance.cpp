// Acceptance checks, one PASS/FAIL line per criterion. Tolerances and time
// budgets are fixed below. Criteria that need the public effort datasets
// read them from $OMT_DATA_DIR (default: the source tree's data/) and fail
// when the files are absent.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "omt/baselines.hpp"
#include "omt/bees.hpp"
#include "omt/cli.hpp"
#include "omt/harness.hpp"
#include "omt/metrics.hpp"
#include "omt/model_tree.hpp"
#include "support.hpp"

using namespace omt;
using namespace omt::test;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("OMT_DATA_DIR"); env && *env) return env;
    return OMT_SOURCE_DATA_DIR;
}

std::string join(const std::vector<std::string>& parts, const char* sep = ", ") {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
    return out;
}

// Empty when every `<id>.csv` and `<id>.schema` exists, else a message.
std::string missing_data(const std::vector<std::string>& ids) {
    std::vector<std::string> absent;
    for (const auto& id : ids) {
        if (!std::filesystem::exists(data_dir() / (id + ".csv")) ||
            !std::filesystem::exists(data_dir() / (id + ".schema"))) {
            absent.push_back(id);
        }
    }
    if (absent.empty()) return {};
    return fmt::format("no data for {} in {}", join(absent), data_dir().string());
}

Dataset load(const std::string& id) { return load_dataset(data_dir() / (id + ".csv"), data_dir() / (id + ".schema")); }

// ---------------------------------------------------------------------------
// 1. Published summary statistics of the bundled datasets.

struct Published {
    const char* id;
    std::size_t cases;
    double min, max;
    int min_decimals, max_decimals;
    double mean, skew;
};

constexpr Published kTable[] = {
    {"desharnais", 77, 546, 23940, 0, 0, 5046.3, 1.96},
    {"cocomo81", 63, 5.9, 11400, 1, 0, 683.5, 4.36},
    {"kemerer", 15, 23.2, 1107.3, 1, 1, 219.2, 2.76},
    {"albrecht", 24, 0.5, 105.2, 1, 1, 21.87, 2.15},
    {"maxwell", 62, 583, 63694, 0, 0, 8223.2, 3.27},
    {"telecom", 18, 23.45, 1115.5, 2, 1, 284.3, 1.78},
};
constexpr double kMeanTolerance = 0.05;
constexpr double kSkewTolerance = 0.15;
constexpr double kStatsBudgetSeconds = 1.0;

bool as_printed(double value, double printed, int decimals) {
    return std::abs(value - printed) <= 0.5 * std::pow(10.0, -decimals) + 1e-9;
}

Outcome published_statistics() {
    std::vector<std::string> ids;
    for (const auto& row : kTable) ids.push_back(row.id);
    if (const auto missing = missing_data(ids); !missing.empty()) return {false, missing};
    std::vector<std::string> mismatches;
    for (const auto& row : kTable) {
        std::ostringstream out, err;
        const int status = run_cli({"stats", "--data-dir", data_dir().string(), "--dataset", row.id, "--json"}, out, err);
        if (status != kExitOk) {
            mismatches.push_back(fmt::format("{}: {}", row.id, err.str()));
            continue;
        }
        const auto j = nlohmann::json::parse(out.str());
        const auto cases = j["cases"].get<std::size_t>();
        const double min = j["min"], max = j["max"], mean = j["mean"], skew = j["skewness"];
        if (cases != row.cases || !as_printed(min, row.min, row.min_decimals) ||
            !as_printed(max, row.max, row.max_decimals) || std::abs(mean - row.mean) > kMeanTolerance ||
            std::abs(skew - row.skew) > kSkewTolerance) {
            mismatches.push_back(fmt::format("{}: cases {} min {:g} max {:g} mean {:.2f} skew {:.2f}", row.id, cases,
                                             min, max, mean, skew));
        }
    }
    if (!mismatches.empty()) return {false, join(mismatches, "; ")};
    return {true, "6 datasets match"};
}

// ---------------------------------------------------------------------------
// 2. Single-leaf tree against an independent least-squares solution.

constexpr double kLeastSquaresTolerance = 1e-6;

Outcome least_squares_oracle() {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng coef_rng(seed * 7919);
        std::vector<double> b(4);
        for (auto& v : b) v = coef_rng.uniform(1.0, 3.0) * (coef_rng.below(2) ? 1.0 : -1.0);
        const Dataset d = random_table(30, 4, seed, [&](const std::vector<double>& x, Rng& g) {
            double y = 200.0 + g.normal();
            for (std::size_t j = 0; j < 4; ++j) y += b[j] * x[j];
            return y;
        }, 0.0, 10.0);
        const auto tree = build_tree(d, {d.rows(), false, 0.0, 0.05});
        if (tree.leaf_count() != 1) return {false, fmt::format("seed {}: {} leaves", seed, tree.leaf_count())};
        const auto beta = normal_equations(d);
        for (std::size_t r = 0; r < d.rows(); ++r) {
            double y = beta[0];
            for (std::size_t j = 0; j < 4; ++j) y += beta[j + 1] * d.value(r, j);
            worst = std::max(worst, std::abs(tree.predict(d, r) - y) / std::max(1.0, std::abs(y)));
        }
    }
    return {worst <= kLeastSquaresTolerance, fmt::format("max relative error {:.2e} over 20 datasets", worst)};
}

// ---------------------------------------------------------------------------
// 3. Smoothing limits on a fixed tree.

constexpr double kSmoothingTolerance = 1e-3;  // times the target range

Outcome smoothing_identities() {
    const Dataset d = random_table(60, 3, 17, [](const std::vector<double>& x, Rng& g) {
        return 20 + (x[0] > 0.4 ? 40 * x[1] : 5) + g.uniform01();
    });
    const auto tree = build_tree(d, {4, false, 15.0, 0.05});
    if (tree.leaf_count() < 2) return {false, "fixture tree has a single leaf"};
    const auto raw = tree.with_smoothing(0.0);
    const auto flat = tree.with_smoothing(1e9);
    const auto [lo, hi] = std::minmax_element(d.efforts().begin(), d.efforts().end());
    const double range = *hi - *lo;
    bool exact = true;
    double worst = 0.0;
    for (std::size_t r = 0; r < d.rows(); ++r) {
        const auto x = d.row(r);
        exact = exact && raw.predict(x) == raw.node_output(raw.route(x), x);
        worst = std::max(worst, std::abs(flat.predict(x) - flat.node_output(0, x)));
    }
    return {exact && worst <= kSmoothingTolerance * range,
            fmt::format("{} leaves, K=0 exact: {}, K=1e9 max gap {:.2e} x range", tree.leaf_count(),
                        exact ? "yes" : "no", worst / range)};
}

// ---------------------------------------------------------------------------
// 4. Stopping rules and leaf coverage on the bundled datasets.

const std::vector<std::string> kBundled = {"albrecht", "kemerer", "desharnais", "cocomo81",
                                           "maxwell",  "telecom", "nasa93"};

Outcome stopping_rules() {
    if (const auto missing = missing_data(kBundled); !missing.empty()) return {false, missing};
    std::vector<Dataset> sets;
    for (const auto& id : kBundled) sets.push_back(load(id));
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const auto& d = sets[i];
        if (build_tree(d, {2, false, 15.0, 1.0}).leaf_count() != 1 ||
            build_tree(d, {d.rows(), false, 15.0, 0.05}).leaf_count() != 1) {
            return {false, kBundled[i] + ": T=1 or C=N grew a split"};
        }
    }
    Rng rng(4);
    for (int draw = 0; draw < 100; ++draw) {
        const std::size_t i = rng.below(sets.size());
        const MTParams p{2 + rng.below(14), rng.below(2) == 1, rng.uniform(0, 100), rng.uniform(0.0005, 0.5)};
        const auto tree = build_tree(sets[i], p);
        if (tree.leaf_count() == 1) continue;
        for (const auto& node : tree.nodes()) {
            if (node.is_leaf() && node.coverage < p.min_leaf) {
                return {false, fmt::format("{}: leaf with {} rows under C={}", kBundled[i], node.coverage, p.min_leaf)};
            }
        }
    }
    return {true, "7 datasets, 100 draws"};
}

// ---------------------------------------------------------------------------
// 5. Bees Algorithm on the sphere function.

constexpr double kSphereTarget = 1e-2;
constexpr int kSphereHits = 19;

Outcome sphere() {
    const SearchSpace space(std::vector<Dimension>(4, Dimension{"x", -5.0, 5.0}));
    BeesConfig cfg;  // n=30, s=30, e=20, nep=15, osp=20, ngh=0.15
    cfg.max_iterations = 50;
    cfg.epsilon = 0.0;
    auto f = [](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        return s;
    };
    int hits = 0;
    bool monotone = true, same = true;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto a = optimize(f, space, cfg, seed);
        OptimizeOptions opt;
        opt.workers = 8;
        const auto b = optimize(f, space, cfg, seed, opt);
        hits += a.best.fitness <= kSphereTarget;
        for (std::size_t i = 1; i < a.trace.size(); ++i) monotone = monotone && a.trace[i].best_fitness <= a.trace[i - 1].best_fitness;
        same = same && a.best.position == b.best.position && a.trace.size() == b.trace.size();
        for (std::size_t i = 0; same && i < a.trace.size(); ++i) same = a.trace[i].best_fitness == b.trace[i].best_fitness;
    }
    return {hits >= kSphereHits && monotone && same,
            fmt::format("{}/20 runs <= 1e-2, monotone: {}, 1 vs 8 workers identical: {}", hits, monotone ? "yes" : "no",
                        same ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 6. Metrics against per-definition recomputation.

double brute_mean_mre(const PredictionSet& p) {
    double sum = 0.0;
    for (const auto& x : p) sum += std::abs(x.actual - x.predicted) / x.actual;
    return 100.0 * sum / static_cast<double>(p.size());
}

// k-th smallest MRE without sorting.
double kth_mre(const PredictionSet& p, std::size_t k) {
    for (const auto& x : p) {
        const double v = std::abs(x.actual - x.predicted) / x.actual;
        std::size_t below = 0, equal = 0;
        for (const auto& y : p) {
            const double w = std::abs(y.actual - y.predicted) / y.actual;
            below += w < v;
            equal += w == v;
        }
        if (below <= k && k < below + equal) return v;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double brute_median_mre(const PredictionSet& p) {
    const std::size_t n = p.size();
    if (n % 2) return 100.0 * kth_mre(p, n / 2);
    return 100.0 * (0.5 * (kth_mre(p, n / 2 - 1) + kth_mre(p, n / 2)));
}

double brute_pred(const PredictionSet& p) {
    std::size_t hits = 0;
    for (const auto& x : p) hits += std::abs(x.actual - x.predicted) / x.actual < 0.25;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(p.size());
}

Outcome metrics_oracle() {
    Rng rng(6);
    for (int trial = 0; trial < 1000; ++trial) {
        PredictionSet p(1 + rng.below(40));
        for (auto& x : p) x = {rng.uniform(0.5, 5000.0), rng.uniform(0.0, 8000.0)};
        if (mmre(p) != brute_mean_mre(p) || mdmre(p) != brute_median_mre(p) || pred(p) != brute_pred(p)) {
            return {false, fmt::format("prediction set {} differs", trial)};
        }
    }
    const PredictionSet boundary{{100, 125}, {100, 75}, {100, 124.9}};
    if (pred(boundary) != 100.0 / 3.0) return {false, "MRE = 0.25 counted as a hit"};

    // Every tie-free 4 vs 4 sample is a split of the ranks 1..8.
    for (unsigned mask = 0; mask < 256; ++mask) {
        if (__builtin_popcount(mask) != 4) continue;
        std::vector<double> a, b;
        for (int r = 1; r <= 8; ++r) (mask & (1u << (r - 1)) ? a : b).push_back(r);
        const double w = std::accumulate(a.begin(), a.end(), 0.0);
        std::size_t below = 0, above = 0, total = 0;
        for (unsigned other = 0; other < 256; ++other) {
            if (__builtin_popcount(other) != 4) continue;
            double s = 0.0;
            for (int r = 1; r <= 8; ++r) s += other & (1u << (r - 1)) ? r : 0;
            ++total;
            below += s <= w;
            above += s >= w;
        }
        const double expected = std::min(1.0, 2.0 * static_cast<double>(std::min(below, above)) / static_cast<double>(total));
        const auto r = wilcoxon_rank_sum(a, b);
        if (!r.exact || std::abs(r.p_value - expected) > 1e-12) {
            return {false, fmt::format("ranks mask {:#x}: p {} vs {}", mask, r.p_value, expected)};
        }
    }
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(3 + rng.below(20)), b(3 + rng.below(20));
        for (auto& x : a) x = std::round(rng.uniform(0, 50));
        for (auto& x : b) x = std::round(rng.uniform(0, 60));
        if (wilcoxon_rank_sum(a, b).p_value != wilcoxon_rank_sum(b, a).p_value) {
            return {false, fmt::format("asymmetric p on pair {}", trial)};
        }
    }
    return {true, "1000 sets, 70 rank splits, 100 symmetric pairs"};
}

// ---------------------------------------------------------------------------
// 7. MLP gradient.

constexpr double kGradientTolerance = 1e-4;

Outcome mlp_gradient() {
    const std::vector<double> x{0.1, 0.9, 0.3, 0.4, 0.2, 0.6, 0.8, 0.5, 0.1, 0.0, 1.0, 0.7, 0.7, 0.3, 0.9};
    const std::vector<double> t{0.2, 0.9, 0.4, 0.1, 0.7};
    const auto net = MlpNetwork::random(3, 2, 8);
    const auto g = net.gradient(x, t);
    double worst = 0.0;
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        MlpNetwork plus = net, minus = net;
        const double h = 1e-6;
        plus.weights[i] += h;
        minus.weights[i] -= h;
        const double fd = (plus.loss(x, t) - minus.loss(x, t)) / (2 * h);
        worst = std::max(worst, std::abs(g[i] - fd) / std::max(1.0, std::abs(fd)));
    }
    return {worst <= kGradientTolerance,
            fmt::format("{} weights, max relative error {:.2e}", net.weights.size(), worst)};
}

// ---------------------------------------------------------------------------
// 8. Direction of the comparison against CBR and MLP.

constexpr int kBeatsCbr = 7;
constexpr int kBeatsMlp = 8;
constexpr double kDirectionalBudgetSeconds = 15 * 60;

Outcome directional() {
    const std::vector<std::string> ids = {"albrecht", "telecom", "kemerer"};
    if (const auto missing = missing_data(ids); !missing.empty()) return {false, missing};
    ExperimentConfig cfg;
    for (const auto& id : ids) cfg.datasets.push_back({id, load(id)});
    cfg.methods = {Method::omt, Method::cbr, Method::mlp};
    cfg.workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<int> cbr(ids.size(), 0), mlp(ids.size(), 0);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        cfg.base_seed = seed * 1000;
        const auto rep = run_experiment(cfg);
        auto test_mmre = [&](const std::string& id, Method m) {
            for (const auto& s : rep.summary) {
                if (s.dataset == id && s.method == m && s.split == "test") return s.mmre;
            }
            return std::numeric_limits<double>::quiet_NaN();
        };
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const double omt = test_mmre(ids[i], Method::omt);
            cbr[i] += omt < test_mmre(ids[i], Method::cbr);
            mlp[i] += omt < test_mmre(ids[i], Method::mlp);
        }
    }
    bool pass = true;
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        pass = pass && cbr[i] >= kBeatsCbr && mlp[i] >= kBeatsMlp;
        parts.push_back(fmt::format("{}: below CBR {}/10, below MLP {}/10", ids[i], cbr[i], mlp[i]));
    }
    return {pass, join(parts, "; ")};
}

// ---------------------------------------------------------------------------
// 9. Byte-identical benchmark reruns.

Outcome benchmark_determinism() {
    TempDir dir;
    write_synthetic_projects(dir.path(), "synthetic", 36, 9);
    write_file(dir / "run.cfg",
               "datasets = synthetic\nrepeats = 2\nseed = 5\nscouts = 8\nsites = 4\nelite = 2\nnep = 3\nosp = 2\n"
               "iterations = 5\nmlp_epochs = 300\n");
    std::string first;
    for (const char* workers : {"1", "4"}) {
        std::ostringstream out, err;
        const auto target = dir / (std::string("out") + workers);
        const int status = run_cli({"benchmark", "--config", (dir / "run.cfg").string(), "--data-dir",
                                    dir.path().string(), "--workers", workers, "--out", target.string()},
                                   out, err);
        if (status != kExitOk) return {false, fmt::format("benchmark exited {}: {}", status, err.str())};
        std::string files;
        for (const char* f : {"summary.csv", "significance.csv", "residuals.csv", "traces.csv"}) files += read_file(target / f);
        if (first.empty()) {
            first = files;
        } else if (files != first) {
            return {false, "export files differ between runs"};
        }
    }
    return {true, fmt::format("{} bytes identical across two runs", first.size())};
}

}  // namespace

int main() {
    using Clock = std::chrono::steady_clock;
    struct Criterion {
        const char* name;
        std::function<Outcome()> check;
        double budget_seconds;
    };
    const Criterion criteria[] = {
        {"published dataset statistics", published_statistics, kStatsBudgetSeconds},
        {"single-leaf least-squares oracle", least_squares_oracle, 5.0},
        {"smoothing identities", smoothing_identities, 60.0},
        {"stopping rules and leaf coverage", stopping_rules, 60.0},
        {"Bees Algorithm on the sphere function", sphere, 10.0},
        {"metrics oracle", metrics_oracle, 60.0},
        {"MLP gradient check", mlp_gradient, 60.0},
        {"OMT below CBR and MLP", directional, kDirectionalBudgetSeconds},
        {"benchmark determinism", benchmark_determinism, 60.0},
    };
    int failures = 0;
    int index = 1;
    for (const auto& c : criteria) {
        const auto start = Clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
        if (o.pass && seconds > c.budget_seconds) {
            o = {false, fmt::format("{}; took {:.1f} s, budget {:.0f} s", o.detail, seconds, c.budget_seconds)};
        }
        failures += !o.pass;
        std::cout << fmt::format("criterion {}: {}  {} ({}; {:.2f} s)\n", index++, o.pass ? "PASS" : "FAIL", c.name,
                                 o.detail, seconds);
    }
    std::cout << fmt::format("{} of {} criteria passed\n", 9 - failures, 9);
    return failures == 0 ? 0 : 1;
}
