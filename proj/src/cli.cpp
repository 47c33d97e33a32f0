#include "omt/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "omt/bees.hpp"
#include "omt/dataset.hpp"
#include "omt/harness.hpp"
#include "omt/metrics.hpp"
#include "omt/model_tree.hpp"

namespace omt {

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct KeySpec {
    const char* key;
    const char* help;
};

constexpr KeySpec kBeesKeys[] = {
    {"scouts", "n: scout bees"},
    {"sites", "s: selected sites (clamped to n)"},
    {"elite", "e: elite sites (clamped to s)"},
    {"nep", "recruits per elite site"},
    {"osp", "recruits per other selected site"},
    {"ngh", "initial patch radius as a fraction of each range"},
    {"ngh_decay", "patch shrink factor per iteration"},
    {"iterations", "maximum optimisation iterations"},
    {"epsilon", "early-stop improvement threshold (0 disables)"},
};

constexpr KeySpec kExperimentKeys[] = {
    {"datasets", "comma-separated dataset ids"},
    {"methods", "comma-separated subset of OMT,MT-default,CBR,SWR,MLP (or 'all')"},
    {"folds", "k for stratified cross-validation"},
    {"repeats", "cross-validation repeats"},
    {"seed", "base seed; repeat r uses seed + r"},
    {"alpha", "significance level"},
    {"workers", "parallel workers"},
    {"out", "output directory"},
    {"data_dir", "dataset directory"},
    {"c", "MT-default C"},
    {"prune", "MT-default P (true/false)"},
    {"k", "MT-default K"},
    {"t", "MT-default T"},
    {"mlp_hidden", "MLP hidden units (0 = automatic)"},
    {"mlp_rate", "MLP learning rate"},
    {"mlp_momentum", "MLP momentum"},
    {"mlp_epochs", "MLP epochs"},
};

std::string flag_name(std::string_view key) {
    std::string name = "--" + std::string(key);
    std::replace(name.begin(), name.end(), '_', '-');
    return name;
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::stringstream ss{std::string(s)};
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || p != end) {
        throw UsageError(fmt::format("invalid number '{}' for '{}'", v, key));
    }
    return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || p != end) {
        throw UsageError(fmt::format("invalid non-negative integer '{}' for '{}'", v, key));
    }
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError(fmt::format("invalid boolean '{}' for '{}'", v, key));
}

using Settings = std::map<std::string, std::string>;

void apply_bees(const Settings& s, BeesConfig& b) {
    auto get = [&](const char* key, auto apply) {
        if (auto it = s.find(key); it != s.end()) apply(it->first, it->second);
    };
    get("scouts", [&](auto& k, auto& v) { b.scouts = to_u64(k, v); });
    get("sites", [&](auto& k, auto& v) { b.sites = to_u64(k, v); });
    get("elite", [&](auto& k, auto& v) { b.elite_sites = to_u64(k, v); });
    get("nep", [&](auto& k, auto& v) { b.elite_recruits = to_u64(k, v); });
    get("osp", [&](auto& k, auto& v) { b.other_recruits = to_u64(k, v); });
    get("ngh", [&](auto& k, auto& v) { b.patch_radius = to_double(k, v); });
    get("ngh_decay", [&](auto& k, auto& v) { b.patch_decay = to_double(k, v); });
    get("iterations", [&](auto& k, auto& v) { b.max_iterations = to_u64(k, v); });
    get("epsilon", [&](auto& k, auto& v) { b.epsilon = to_double(k, v); });
    try {
        b.normalized().validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

// Registers one string option per key; values given on the command line
// land in `flags`.
void add_key_options(CLI::App& app, std::span<const KeySpec> keys, Settings& flags) {
    for (const auto& k : keys) {
        app.add_option_function<std::string>(
            flag_name(k.key), [&flags, key = std::string(k.key)](const std::string& v) { flags[key] = v; },
            k.help);
    }
}

struct DataSource {
    std::string label;
    std::filesystem::path data;
    std::filesystem::path schema;
};

struct SourceOptions {
    std::string data;
    std::string schema;
    std::vector<std::string> ids;
    std::string data_dir;
};

void add_source_options(CLI::App& cmd, SourceOptions& o, bool many_ids) {
    cmd.add_option("--data", o.data, "CSV file with a header row");
    cmd.add_option("--schema", o.schema, "schema sidecar (default: data path with .schema)");
    if (many_ids) {
        cmd.add_option("--dataset", o.ids, "dataset id under the data directory (repeatable)");
    } else {
        cmd.add_option_function<std::string>(
            "--dataset", [&o](const std::string& v) { o.ids = {v}; },
            "dataset id under the data directory");
    }
    cmd.add_option("--data-dir", o.data_dir, "dataset directory (default: $OMT_DATA_DIR or data)");
}

DataSource by_id(const std::string& id, const std::filesystem::path& dir) {
    return {id, dir / (id + ".csv"), dir / (id + ".schema")};
}

std::vector<DataSource> resolve_sources(const SourceOptions& o) {
    const std::filesystem::path dir = o.data_dir.empty() ? default_data_dir() : std::filesystem::path(o.data_dir);
    std::vector<DataSource> out;
    if (!o.data.empty()) {
        std::filesystem::path schema = o.schema;
        if (schema.empty()) schema = std::filesystem::path(o.data).replace_extension(".schema");
        out.push_back({std::filesystem::path(o.data).stem().string(), o.data, schema});
    }
    for (const auto& id : o.ids) out.push_back(by_id(id, dir));
    if (out.empty()) throw UsageError("no input: give --data FILE or --dataset ID");
    return out;
}

Dataset load(const DataSource& s) {
    for (const auto& p : {s.data, s.schema}) {
        if (!std::filesystem::exists(p)) throw UsageError(fmt::format("{}: no such file", p.string()));
    }
    try {
        return load_dataset(s.data, s.schema);
    } catch (const DataError& e) {
        throw UsageError(e.what());
    }
}

std::string describe(const MTParams& p) {
    return fmt::format("C={} P={} K={:g} T={:g}", p.min_leaf, p.prune ? "true" : "false", p.smoothing,
                       p.split_threshold);
}

std::string metric_line(std::string_view label, const PredictionSet& p) {
    return fmt::format("{}: MMRE={:.4g}% MdMRE={:.4g}% PRED(0.25)={:.4g}%\n", label, mmre(p), mdmre(p),
                       pred(p));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw UsageError(fmt::format("{}: cannot write", path.string()));
    f << text;
}

// ---------------------------------------------------------------- stats

int cmd_stats(const SourceOptions& src, bool json, std::ostream& out) {
    const auto sources = resolve_sources(src);
    std::vector<std::pair<std::string, StatsReport>> rows;
    for (const auto& s : sources) rows.emplace_back(s.label, summary_stats(load(s)));

    if (json) {
        auto to_json = [](const std::string& label, const StatsReport& r) {
            return nlohmann::ordered_json{{"dataset", label}, {"cases", r.cases}, {"min", r.min},
                                          {"max", r.max},     {"mean", r.mean},   {"skewness", r.skewness}};
        };
        if (rows.size() == 1) {
            out << to_json(rows[0].first, rows[0].second).dump(2) << '\n';
        } else {
            auto arr = nlohmann::ordered_json::array();
            for (const auto& [label, r] : rows) arr.push_back(to_json(label, r));
            out << arr.dump(2) << '\n';
        }
        return kExitOk;
    }
    out << fmt::format("{:<14}{:>7}{:>12}{:>12}{:>12}{:>10}\n", "dataset", "cases", "min", "max", "mean",
                       "skewness");
    for (const auto& [label, r] : rows) {
        out << fmt::format("{:<14}{:>7}{:>12.6g}{:>12.6g}{:>12.2f}{:>10.2f}\n", label, r.cases, r.min, r.max,
                           r.mean, r.skewness);
    }
    return kExitOk;
}

// ---------------------------------------------------------------- fit

struct FitOptions {
    SourceOptions src;
    std::size_t c = MTParams{}.min_leaf;
    bool prune = MTParams{}.prune;
    double k = MTParams{}.smoothing;
    double t = MTParams{}.split_threshold;
    bool tune = false;
    std::uint64_t seed = 1;
    std::string tree_out;
    std::string trace_out;
    std::size_t workers = 1;
    Settings bees;
};

int cmd_fit(const FitOptions& o, std::ostream& out) {
    const auto sources = resolve_sources(o.src);
    if (sources.size() != 1) throw UsageError("fit takes exactly one dataset");
    const Dataset data = load(sources.front());

    MTParams params{o.c, o.prune, o.k, o.t};
    try {
        params.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    BeesConfig bees;
    apply_bees(o.bees, bees);

    out << fmt::format("data: {} ({} rows, {} features)\n", sources.front().label, data.rows(),
                       data.feature_count());
    ModelTree tree;
    if (o.tune) {
        TuneOptions topt;
        topt.workers = o.workers;
        TuneResult tuned;
        try {
            tuned = tune_model_tree(data, bees, o.seed, topt);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        const auto& trace = tuned.optimization.trace;
        out << fmt::format("tuned: {}\n", describe(tuned.params));
        out << fmt::format("search: {} iterations, {} evaluations, inner-CV MMRE {:.4g}% -> {:.4g}%\n",
                           trace.back().iteration, tuned.optimization.evaluations,
                           trace.front().best_fitness, trace.back().best_fitness);
        if (!o.trace_out.empty()) {
            std::ostringstream ss;
            write_trace(ss, trace);
            write_text(o.trace_out, ss.str());
        }
        tree = std::move(tuned.tree);
    } else {
        out << fmt::format("params: {}\n", describe(params));
        tree = build_tree(data, params);
    }
    out << fmt::format("tree: {} leaves, depth {}\n", tree.leaf_count(), tree.depth());
    out << tree.to_string();
    PredictionSet train;
    for (std::size_t r = 0; r < data.rows(); ++r) train.push_back({data.effort(r), tree.predict(data, r)});
    out << metric_line("train", train);
    if (!o.tree_out.empty()) write_text(o.tree_out, tree.to_string());
    return kExitOk;
}

// ---------------------------------------------------------------- benchmark

std::vector<std::string> all_keys() {
    std::vector<std::string> keys;
    for (const auto& k : kExperimentKeys) keys.emplace_back(k.key);
    for (const auto& k : kBeesKeys) keys.emplace_back(k.key);
    return keys;
}

ExperimentConfig experiment_from(const Settings& s, std::filesystem::path& out_dir) {
    ExperimentConfig cfg;
    auto get = [&](const char* key) -> const std::string* {
        auto it = s.find(key);
        return it == s.end() ? nullptr : &it->second;
    };
    std::filesystem::path data_dir = default_data_dir();
    if (auto* v = get("data_dir")) data_dir = *v;
    out_dir = "results";
    if (auto* v = get("out")) out_dir = *v;

    const std::string* ids = get("datasets");
    if (!ids || split_list(*ids).empty()) throw UsageError("no datasets given (key 'datasets')");
    if (auto* v = get("methods")) {
        const auto names = split_list(*v);
        if (!(names.size() == 1 && (names[0] == "all" || names[0] == "ALL"))) {
            cfg.methods.clear();
            for (const auto& n : names) {
                auto m = parse_method(n);
                if (!m) throw UsageError(fmt::format("unknown method '{}' for 'methods'", n));
                cfg.methods.push_back(*m);
            }
        }
    }
    if (auto* v = get("folds")) cfg.folds = to_u64("folds", *v);
    if (auto* v = get("repeats")) cfg.repeats = to_u64("repeats", *v);
    if (auto* v = get("seed")) cfg.base_seed = to_u64("seed", *v);
    if (auto* v = get("alpha")) cfg.alpha = to_double("alpha", *v);
    if (auto* v = get("workers")) cfg.workers = to_u64("workers", *v);
    if (auto* v = get("c")) cfg.mt_default.min_leaf = to_u64("c", *v);
    if (auto* v = get("prune")) cfg.mt_default.prune = to_bool("prune", *v);
    if (auto* v = get("k")) cfg.mt_default.smoothing = to_double("k", *v);
    if (auto* v = get("t")) cfg.mt_default.split_threshold = to_double("t", *v);
    if (auto* v = get("mlp_hidden")) cfg.mlp.hidden = to_u64("mlp_hidden", *v);
    if (auto* v = get("mlp_rate")) cfg.mlp.learning_rate = to_double("mlp_rate", *v);
    if (auto* v = get("mlp_momentum")) cfg.mlp.momentum = to_double("mlp_momentum", *v);
    if (auto* v = get("mlp_epochs")) cfg.mlp.epochs = to_u64("mlp_epochs", *v);
    apply_bees(s, cfg.bees);

    for (const auto& id : split_list(*ids)) cfg.datasets.push_back({id, load(by_id(id, data_dir))});
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

void print_grids(const ExperimentReport& rep, double alpha, std::ostream& out) {
    out << fmt::format("{:<14}{:<12}{:>10}{:>8}{:>8}{:>12}{:>8}{:>8}\n", "dataset", "method", "test MMRE",
                       "MdMRE", "PRED", "train MMRE", "MdMRE", "PRED");
    for (std::size_t i = 0; i + 1 < rep.summary.size(); i += 2) {
        const auto& te = rep.summary[i];
        const auto& tr = rep.summary[i + 1];
        out << fmt::format("{:<14}{:<12}{:>10.2f}{:>8.2f}{:>8.2f}{:>12.2f}{:>8.2f}{:>8.2f}\n", te.dataset,
                           method_name(te.method), te.mmre, te.mdmre, te.pred, tr.mmre, tr.mdmre, tr.pred);
    }
    if (rep.significance.empty()) return;
    out << fmt::format("\nWilcoxon rank-sum p-values, OMT vs baseline (alpha = {:g})\n", alpha);
    out << fmt::format("{:<14}{:<12}{:>10}{:>6}\n", "dataset", "baseline", "p", "sig");
    for (const auto& s : rep.significance) {
        out << fmt::format("{:<14}{:<12}{:>10.4f}{:>6}\n", s.dataset, method_name(s.baseline),
                           s.result.p_value, s.result.significant ? "*" : "");
    }
}

int cmd_benchmark(const std::string& config_path, const Settings& flags, std::ostream& out,
                  std::ostream& err) {
    Settings settings;
    if (!config_path.empty()) {
        try {
            settings = read_key_values(config_path, all_keys());
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    for (const auto& [k, v] : flags) settings[k] = v;

    std::filesystem::path out_dir;
    const ExperimentConfig cfg = experiment_from(settings, out_dir);
    const ExperimentReport rep = run_experiment(cfg);
    print_grids(rep, cfg.alpha, out);
    try {
        export_report(rep, out_dir);
    } catch (const std::runtime_error& e) {
        throw UsageError(e.what());
    }
    out << fmt::format("\nwrote {}\n", out_dir.string());

    if (rep.failures() == 0) return kExitOk;
    err << fmt::format("{} of {} cells failed:\n", rep.failures(), rep.cells.size());
    for (const auto& c : rep.cells) {
        if (c.ok) continue;
        err << fmt::format("  {} {} repeat {} fold {}: {}\n", rep.dataset_ids[c.dataset], method_name(c.method),
                           c.repeat, c.fold, c.error);
    }
    return kExitCellFailures;
}

}  // namespace

std::filesystem::path default_data_dir() {
    if (const char* env = std::getenv("OMT_DATA_DIR"); env && *env) return env;
    return "data";
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path,
                                                   const std::vector<std::string>& allowed) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument(fmt::format("{}: cannot open config file", path.string()));
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string text = trim(line);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(
                fmt::format("{}:{}: expected 'key = value'", path.string(), line_no));
        }
        std::string key = trim(std::string_view(text).substr(0, eq));
        std::replace(key.begin(), key.end(), '-', '_');
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw std::invalid_argument(fmt::format("{}:{}: unknown key '{}'", path.string(), line_no, key));
        }
        out[key] = trim(std::string_view(text).substr(eq + 1));
    }
    return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Model trees tuned by the Bees Algorithm for effort estimation", "omt"};
    app.require_subcommand(1);

    SourceOptions stats_src;
    bool stats_json = false;
    auto* stats = app.add_subcommand("stats", "effort summary statistics");
    add_source_options(*stats, stats_src, true);
    stats->add_flag("--json", stats_json, "machine-readable output");

    FitOptions fit_opt;
    auto* fit = app.add_subcommand("fit", "build one model tree, or tune one with --tune");
    add_source_options(*fit, fit_opt.src, false);
    fit->add_option("--c", fit_opt.c, "C: minimum rows per leaf (>= 2)");
    fit->add_flag("--prune,!--no-prune", fit_opt.prune, "P: prune the grown tree");
    fit->add_option("--k", fit_opt.k, "K: smoothing coefficient (>= 0)");
    fit->add_option("--t", fit_opt.t, "T: split threshold, fraction of the global sd (0, 1]");
    fit->add_flag("--tune", fit_opt.tune, "search C, P, K, T with the Bees Algorithm");
    fit->add_option("--seed", fit_opt.seed, "seed for --tune");
    fit->add_option("--tree-out", fit_opt.tree_out, "write the tree text here");
    fit->add_option("--trace-out", fit_opt.trace_out, "write the optimisation trace CSV here");
    fit->add_option("--workers", fit_opt.workers, "parallel evaluation workers");
    add_key_options(*fit, kBeesKeys, fit_opt.bees);

    std::string config_path;
    Settings bench_flags;
    auto* bench = app.add_subcommand("benchmark", "cross-validated comparison of all methods");
    bench->add_option("--config", config_path, "key = value file; flags override it");
    std::vector<KeySpec> bench_keys;
    for (const auto& k : kExperimentKeys) {
        if (std::string_view(k.key) != "prune") bench_keys.push_back(k);
    }
    add_key_options(*bench, bench_keys, bench_flags);
    add_key_options(*bench, kBeesKeys, bench_flags);
    bench->add_flag_callback("--prune", [&] { bench_flags["prune"] = "true"; }, "MT-default P = true");
    bench->add_flag_callback("--no-prune", [&] { bench_flags["prune"] = "false"; }, "MT-default P = false");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const auto subs = app.get_subcommands();
        out << (subs.empty() ? app.help() : subs.front()->help());
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (stats->parsed()) return cmd_stats(stats_src, stats_json, out);
        if (fit->parsed()) return cmd_fit(fit_opt, out);
        return cmd_benchmark(config_path, bench_flags, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

}  // namespace omt
