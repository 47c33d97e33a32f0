#include "omt/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "omt/parallel.hpp"

namespace omt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string num(double x) { return std::isfinite(x) ? fmt::format("{:.4g}", x) : "NA"; }

}  // namespace

std::string_view method_name(Method m) {
    switch (m) {
        case Method::omt: return "OMT";
        case Method::mt_default: return "MT-default";
        case Method::cbr: return "CBR";
        case Method::swr: return "SWR";
        case Method::mlp: return "MLP";
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view name) {
    const std::string key = lower(name);
    if (key == "mt_default") return Method::mt_default;
    for (Method m : kAllMethods) {
        if (lower(method_name(m)) == key) return m;
    }
    return std::nullopt;
}

void ExperimentConfig::validate() const {
    if (folds < 2) throw std::invalid_argument(fmt::format("folds (k) must be >= 2, got {}", folds));
    if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument(fmt::format("alpha must be in (0, 1), got {}", alpha));
    }
    for (std::size_t i = 0; i < methods.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (methods[i] == methods[j]) {
                throw std::invalid_argument(
                    fmt::format("method {} listed twice", method_name(methods[i])));
            }
        }
    }
    for (const auto& d : datasets) {
        if (d.data.rows() < folds) {
            throw std::invalid_argument(fmt::format("dataset {} has {} rows, fewer than {} folds",
                                                    d.id, d.data.rows(), folds));
        }
    }
    bees.normalized().validate();
    mt_default.validate();
}

std::size_t ExperimentReport::failures() const {
    return static_cast<std::size_t>(
        std::count_if(cells.begin(), cells.end(), [](const CellResult& c) { return !c.ok; }));
}

std::uint64_t cell_seed(std::uint64_t base_seed, std::size_t repeat, std::size_t fold, Method m) {
    return mix_seed(mix_seed(repeat_seed(base_seed, repeat), fold), static_cast<std::uint64_t>(m));
}

namespace {

template <typename Model>
void record(CellResult& cell, const Dataset& data, const Model& model) {
    for (std::size_t r : cell.test_rows) cell.test.push_back({data.effort(r), model.predict(data, r)});
    for (std::size_t r : cell.train_rows) cell.train.push_back({data.effort(r), model.predict(data, r)});
}

void run_cell(CellResult& cell, const Dataset& data, const ExperimentConfig& cfg) {
    const Dataset train = data.subset(cell.train_rows);
    const std::uint64_t seed = cell_seed(cfg.base_seed, cell.repeat, cell.fold, cell.method);
    switch (cell.method) {
        case Method::omt: {
            TuneResult tuned = tune_model_tree(train, cfg.bees, seed);
            cell.params = tuned.params;
            cell.trace = std::move(tuned.optimization.trace);
            record(cell, data, tuned.tree);
            break;
        }
        case Method::mt_default: {
            cell.params = cfg.mt_default;
            record(cell, data, build_tree(train, cfg.mt_default));
            break;
        }
        case Method::cbr: record(cell, data, CbrModel::fit(train)); break;
        case Method::swr: record(cell, data, SwrModel::fit(train)); break;
        case Method::mlp: record(cell, data, MlpModel::fit(train, cfg.mlp, seed)); break;
    }
    for (const auto& p : cell.test) {
        if (!std::isfinite(p.predicted)) throw std::runtime_error("non-finite test prediction");
    }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentReport rep;
    for (const auto& d : cfg.datasets) rep.dataset_ids.push_back(d.id);
    rep.methods = cfg.methods;
    rep.folds = cfg.folds;
    rep.repeats = cfg.repeats;
    rep.base_seed = cfg.base_seed;

    for (std::size_t d = 0; d < cfg.datasets.size(); ++d) {
        for (std::size_t r = 0; r < cfg.repeats; ++r) {
            const FoldAssignment folds =
                make_folds(cfg.datasets[d].data, cfg.folds, repeat_seed(cfg.base_seed, r));
            for (std::size_t f = 0; f < cfg.folds; ++f) {
                const auto test = folds.test_rows(f);
                const auto train = folds.train_rows(f);
                for (Method m : cfg.methods) {
                    CellResult cell;
                    cell.dataset = d;
                    cell.method = m;
                    cell.repeat = r;
                    cell.fold = f;
                    cell.test_rows = test;
                    cell.train_rows = train;
                    rep.cells.push_back(std::move(cell));
                }
            }
        }
    }

    parallel_for(rep.cells.size(), cfg.workers, [&](std::size_t i) {
        CellResult& cell = rep.cells[i];
        try {
            run_cell(cell, cfg.datasets[cell.dataset].data, cfg);
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.ok = false;
            cell.error = e.what();
            cell.test.clear();
            cell.train.clear();
        }
    });

    rep.summary = summarize(rep);
    rep.significance = compare_to_omt(rep, cfg.alpha);
    return rep;
}

std::vector<MetricSummary> summarize(const ExperimentReport& rep) {
    std::vector<MetricSummary> out;
    for (std::size_t d = 0; d < rep.dataset_ids.size(); ++d) {
        for (Method m : rep.methods) {
            for (const bool test_split : {true, false}) {
                double sums[3] = {0.0, 0.0, 0.0};
                std::size_t used = 0;
                for (std::size_t r = 0; r < rep.repeats; ++r) {
                    PredictionSet pooled;
                    for (const auto& c : rep.cells) {
                        if (c.dataset != d || c.method != m || c.repeat != r || !c.ok) continue;
                        const auto& p = test_split ? c.test : c.train;
                        pooled.insert(pooled.end(), p.begin(), p.end());
                    }
                    if (pooled.empty()) continue;
                    sums[0] += mmre(pooled);
                    sums[1] += mdmre(pooled);
                    sums[2] += pred(pooled);
                    ++used;
                }
                MetricSummary row{rep.dataset_ids[d], m, test_split ? "test" : "train", kNaN, kNaN, kNaN};
                if (used > 0) {
                    const auto n = static_cast<double>(used);
                    row.mmre = sums[0] / n;
                    row.mdmre = sums[1] / n;
                    row.pred = sums[2] / n;
                }
                out.push_back(std::move(row));
            }
        }
    }
    return out;
}

std::vector<SignificanceRow> compare_to_omt(const ExperimentReport& rep, double alpha) {
    std::vector<SignificanceRow> out;
    if (std::find(rep.methods.begin(), rep.methods.end(), Method::omt) == rep.methods.end()) return out;
    auto residuals = [&](std::size_t d, Method m) {
        std::vector<double> res;
        for (const auto& c : rep.cells) {
            if (c.dataset != d || c.method != m || !c.ok) continue;
            const auto a = abs_residuals(c.test);
            res.insert(res.end(), a.begin(), a.end());
        }
        return res;
    };
    for (std::size_t d = 0; d < rep.dataset_ids.size(); ++d) {
        const auto omt_res = residuals(d, Method::omt);
        for (Method m : rep.methods) {
            if (m == Method::omt) continue;
            const auto other = residuals(d, m);
            SignificanceRow row{rep.dataset_ids[d], m, {}};
            row.result.alpha = alpha;
            if (omt_res.size() >= 3 && other.size() >= 3) {
                row.result = wilcoxon_rank_sum(omt_res, other, alpha);
            } else {
                row.result.statistic = kNaN;
                row.result.p_value = kNaN;
            }
            out.push_back(std::move(row));
        }
    }
    return out;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    return out;
}

}  // namespace

void export_report(const ExperimentReport& rep, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error(fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));

    {
        auto out = open_output(out_dir / "summary.csv");
        out << "dataset,method,split,MMRE,MdMRE,PRED\n";
        for (const auto& s : rep.summary) {
            out << fmt::format("{},{},{},{},{},{}\n", s.dataset, method_name(s.method), s.split,
                               num(s.mmre), num(s.mdmre), num(s.pred));
        }
    }
    {
        auto out = open_output(out_dir / "significance.csv");
        out << "dataset,baseline,p_value\n";
        for (const auto& s : rep.significance) {
            out << fmt::format("{},{},{}\n", s.dataset, method_name(s.baseline), num(s.result.p_value));
        }
    }
    {
        auto out = open_output(out_dir / "residuals.csv");
        out << "dataset,method,repeat,fold,row_id,abs_residual\n";
        for (const auto& c : rep.cells) {
            if (!c.ok) continue;
            for (std::size_t i = 0; i < c.test.size(); ++i) {
                out << fmt::format("{},{},{},{},{},{}\n", rep.dataset_ids[c.dataset],
                                   method_name(c.method), c.repeat, c.fold, c.test_rows[i],
                                   num(std::abs(c.test[i].actual - c.test[i].predicted)));
            }
        }
    }
    if (std::find(rep.methods.begin(), rep.methods.end(), Method::omt) != rep.methods.end()) {
        auto out = open_output(out_dir / "traces.csv");
        out << "dataset,method,repeat,fold,iteration,best_fitness,ngh\n";
        for (const auto& c : rep.cells) {
            for (const auto& t : c.trace) {
                out << fmt::format("{},{},{},{},{},{},{}\n", rep.dataset_ids[c.dataset],
                                   method_name(c.method), c.repeat, c.fold, t.iteration,
                                   num(t.best_fitness), num(t.patch_radius));
            }
        }
    }
}

}  // namespace omt
