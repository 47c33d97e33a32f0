#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "omt/harness.hpp"
#include "support.hpp"

using namespace omt;
using namespace omt::test;

namespace {

Dataset projects(std::size_t rows, std::uint64_t seed) {
    return random_table(rows, 3, seed, [](const std::vector<double>& x, Rng& g) {
        return (x[0] < 0.5 ? 20 + 40 * x[0] : 100 * x[0]) + 10 * x[1] + g.uniform(0, 2);
    });
}

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.datasets = {{"alpha", projects(30, 1)}, {"beta", projects(24, 2)}};
    cfg.repeats = 2;
    cfg.bees.scouts = 6;
    cfg.bees.sites = 3;
    cfg.bees.elite_sites = 1;
    cfg.bees.elite_recruits = 2;
    cfg.bees.other_recruits = 1;
    cfg.bees.max_iterations = 3;
    cfg.mlp.epochs = 200;
    return cfg;
}

std::string exported(const ExperimentReport& rep) {
    TempDir dir;
    export_report(rep, dir.path());
    std::string all;
    for (const char* f : {"summary.csv", "significance.csv", "residuals.csv", "traces.csv"}) {
        all += f;
        all += "\n";
        all += read_file(dir / f);
    }
    return all;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

const CellResult* find_cell(const ExperimentReport& rep, std::size_t d, std::size_t r, std::size_t f, Method m) {
    for (const auto& c : rep.cells) {
        if (c.dataset == d && c.repeat == r && c.fold == f && c.method == m) return &c;
    }
    return nullptr;
}

}  // namespace

TEST_CASE("method names") {
    for (Method m : kAllMethods) CHECK(parse_method(method_name(m)) == m);
    CHECK(parse_method("cbr") == Method::cbr);
    CHECK(parse_method("mt_default") == Method::mt_default);
    CHECK_FALSE(parse_method("svm"));
}

TEST_CASE("config validation") {
    ExperimentConfig cfg = small_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.folds = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_config();
    cfg.repeats = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_config();
    cfg.methods = {Method::cbr, Method::cbr};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_config();
    cfg.folds = 25;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("beta"), std::invalid_argument);
}

TEST_CASE("CBR on nine rows covers every row once") {
    ExperimentConfig cfg;
    cfg.datasets = {{"nine", projects(9, 3)}};
    cfg.methods = {Method::cbr};
    cfg.repeats = 1;
    const auto rep = run_experiment(cfg);
    REQUIRE(rep.cells.size() == 3);
    std::multiset<std::size_t> rows;
    std::size_t predictions = 0;
    for (const auto& c : rep.cells) {
        CHECK(c.ok);
        predictions += c.test.size();
        rows.insert(c.test_rows.begin(), c.test_rows.end());
        CHECK(c.test_rows.size() + c.train_rows.size() == 9);
    }
    CHECK(predictions == 9);
    CHECK(rows == std::multiset<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("experiment is reproducible and isolated") {
    ExperimentConfig cfg = small_config();
    const auto a = run_experiment(cfg);
    CHECK(a.failures() == 0);
    CHECK(a.cells.size() == 2 * 2 * 3 * 5);
    CHECK(exported(a) == exported(run_experiment(cfg)));

    cfg.workers = 4;
    CHECK(exported(a) == exported(run_experiment(cfg)));

    SUBCASE("every method sees the same split") {
        for (const auto& c : a.cells) {
            const CellResult* ref = find_cell(a, c.dataset, c.repeat, c.fold, Method::omt);
            REQUIRE(ref);
            CHECK(c.test_rows == ref->test_rows);
            CHECK(c.train_rows == ref->train_rows);
        }
        CHECK(find_cell(a, 0, 0, 0, Method::cbr)->test_rows != find_cell(a, 0, 1, 0, Method::cbr)->test_rows);
    }
    SUBCASE("removing methods leaves the others unchanged") {
        cfg.workers = 1;
        cfg.methods = {Method::mlp, Method::omt};
        const auto b = run_experiment(cfg);
        for (const auto& c : b.cells) {
            const CellResult* ref = find_cell(a, c.dataset, c.repeat, c.fold, c.method);
            REQUIRE(ref);
            CHECK(c.test == ref->test);
            CHECK(c.train == ref->train);
            CHECK(c.params == ref->params);
        }
    }
}

TEST_CASE("report metrics match recomputation") {
    const auto rep = run_experiment(small_config());
    REQUIRE(rep.summary.size() == 2 * 5 * 2);
    for (const auto& s : rep.summary) {
        const auto d = static_cast<std::size_t>(
            std::find(rep.dataset_ids.begin(), rep.dataset_ids.end(), s.dataset) - rep.dataset_ids.begin());
        double total = 0.0;
        for (std::size_t r = 0; r < rep.repeats; ++r) {
            PredictionSet pooled;
            for (std::size_t f = 0; f < rep.folds; ++f) {
                const CellResult* c = find_cell(rep, d, r, f, s.method);
                const auto& p = s.split == "test" ? c->test : c->train;
                pooled.insert(pooled.end(), p.begin(), p.end());
            }
            total += mmre(pooled);
        }
        CHECK(s.mmre == doctest::Approx(total / static_cast<double>(rep.repeats)));
    }
    REQUIRE(rep.significance.size() == 2 * 4);
    for (const auto& row : rep.significance) {
        CHECK(row.baseline != Method::omt);
        CHECK(row.result.p_value >= 0.0);
        CHECK(row.result.p_value <= 1.0);
    }
    const auto* cell = find_cell(rep, 0, 0, 0, Method::omt);
    CHECK(cell->params.has_value());
    CHECK_FALSE(cell->trace.empty());
    CHECK(find_cell(rep, 0, 0, 0, Method::mt_default)->params == MTParams{});
}

TEST_CASE("a failing method is contained in its cells") {
    ExperimentConfig cfg = small_config();
    cfg.methods = {Method::cbr, Method::mlp};
    cfg.mlp.learning_rate = std::numeric_limits<double>::infinity();
    const auto rep = run_experiment(cfg);
    CHECK(rep.failures() == 2 * 2 * 3);
    for (const auto& c : rep.cells) {
        CHECK(c.ok == (c.method == Method::cbr));
        if (!c.ok) CHECK(c.error.find("diverged") != std::string::npos);
    }
    for (const auto& s : rep.summary) CHECK(std::isnan(s.mmre) == (s.method == Method::mlp));
    CHECK(rep.significance.empty());
}

TEST_CASE("export shapes") {
    ExperimentConfig cfg;
    cfg.datasets = {{"one", projects(12, 4)}};
    cfg.repeats = 3;

    SUBCASE("no methods gives header-only files") {
        cfg.methods = {};
        TempDir dir;
        export_report(run_experiment(cfg), dir.path());
        CHECK(read_file(dir / "summary.csv") == "dataset,method,split,MMRE,MdMRE,PRED\n");
        CHECK(read_file(dir / "significance.csv") == "dataset,baseline,p_value\n");
        CHECK(read_file(dir / "residuals.csv") == "dataset,method,repeat,fold,row_id,abs_residual\n");
        CHECK_FALSE(std::filesystem::exists(dir / "traces.csv"));
    }
    SUBCASE("one method") {
        cfg.methods = {Method::swr};
        TempDir dir;
        export_report(run_experiment(cfg), dir / "nested");
        const std::string summary = read_file(dir / "nested" / "summary.csv");
        CHECK(lines(summary) == 3);
        CHECK(summary.find("one,SWR,test,") != std::string::npos);
        CHECK(summary.find("one,SWR,train,") != std::string::npos);
        CHECK(lines(read_file(dir / "nested" / "residuals.csv")) == 1 + 3 * 12);
    }
    SUBCASE("unwritable target") {
        TempDir dir;
        write_file(dir / "file", "x");
        cfg.methods = {Method::cbr};
        CHECK_THROWS_AS(export_report(run_experiment(cfg), dir / "file"), std::runtime_error);
    }
}
