#include <cstdlib>

#include "doctest.h"
#include "olbench/config.hpp"
#include "olbench/errors.hpp"
#include "olbench/report.hpp"
#include "support.hpp"

using namespace olbench;
using nlohmann::json;

namespace {

json synthetic_config() {
    return json::parse(R"({
        "dataset": {"kind": "synthetic", "classes": 6, "features": 16, "samples_per_class": 80, "spread": 1.0},
        "warmup": {"classes": 4, "samples_per_class": 30},
        "strategy": ["tinyol", "cwr"],
        "alpha": [0.01, 0.02],
        "batch": 8,
        "seed": 5,
        "pseudo_test": 0.75
    })");
}

}  // namespace

TEST_CASE("config parsing and expansion") {
    const ExperimentConfig c = parse_config(synthetic_config(), ".");
    CHECK(c.dataset.source == DatasetSpec::Source::synthetic);
    CHECK(c.dataset.classes == 6);
    CHECK(c.warmup->classes == 4);
    CHECK(c.seed == 5);
    CHECK(c.boundary.mode == TestBoundary::Mode::fraction);
    CHECK(c.boundary.fraction == 0.75);
    const auto runs = expand_runs(c);
    REQUIRE(runs.size() == 4);
    CHECK(runs[0] == StrategyConfig{StrategyKind::tinyol, 0.01f, 8});
    CHECK(runs[3] == StrategyConfig{StrategyKind::cwr, 0.02f, 8});

    json all = synthetic_config();
    all["strategy"] = "all";
    all["alpha"] = 0.01;
    all["pseudo_test"] = 400;
    const ExperimentConfig c2 = parse_config(all, ".");
    CHECK(expand_runs(c2).size() == 7);
    CHECK(c2.boundary.mode == TestBoundary::Mode::index);
    CHECK(c2.boundary.index == 400);
}

TEST_CASE("config errors") {
    json bad = synthetic_config();
    bad["strategy"] = "sgd";
    CHECK_THROWS_AS(parse_config(bad, "."), ParseError);
    bad = synthetic_config();
    bad["bogus"] = 1;
    CHECK_THROWS_AS(parse_config(bad, "."), ParseError);
    bad = synthetic_config();
    bad["dataset"]["kind"] = "imagenet";
    CHECK_THROWS_AS(parse_config(bad, "."), ParseError);
    bad = synthetic_config();
    bad["alpha"] = json::array();
    CHECK_THROWS_AS(parse_config(bad, "."), ParseError);
    bad = synthetic_config();
    bad["batch"] = 0;
    CHECK_THROWS_AS(expand_runs(parse_config(bad, ".")), ValidationError);
    bad = synthetic_config();
    bad.erase("warmup");
    CHECK_THROWS_AS(prepare(parse_config(bad, ".")), ValidationError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ParseError);
}

TEST_CASE("overrides take precedence") {
    ExperimentConfig c = parse_config(synthetic_config(), ".");
    ConfigOverrides o;
    o.strategy = "cwr";
    o.learning_rate = 0.05f;
    o.batch_size = 16;
    o.seed = 77;
    o.pseudo_test = "300";
    o.freeze_during_test = true;
    o.out = "x.json";
    apply_overrides(c, o);
    CHECK(expand_runs(c) == std::vector<StrategyConfig>{{StrategyKind::cwr, 0.05f, 16}});
    CHECK(c.seed == 77);
    CHECK(c.boundary.mode == TestBoundary::Mode::index);
    CHECK(c.boundary.index == 300);
    CHECK(c.options.freeze_during_test);
    CHECK(c.out == "x.json");

    CHECK(parse_boundary("0.8").mode == TestBoundary::Mode::fraction);
    CHECK(parse_boundary("0.8").fraction == 0.8);
    CHECK(parse_boundary("4000").index == 4000);
    CHECK_THROWS_AS(parse_boundary("0.8x"), ParseError);
    CHECK_THROWS_AS(parse_boundary("-3"), ParseError);
}

TEST_CASE("prepare is deterministic in the master seed") {
    const ExperimentConfig c = parse_config(synthetic_config(), ".");
    const PreparedExperiment a = prepare(c);
    const PreparedExperiment b = prepare(c);
    CHECK(a.dataset == b.dataset);
    CHECK(a.head == b.head);
    CHECK(a.plan.order == b.plan.order);
    CHECK(a.head.labels == std::vector<std::string>{"c0", "c1", "c2", "c3"});
    CHECK(a.dataset.size() == 480);
    CHECK(a.plan.pseudo_test_start == 360);

    json other = synthetic_config();
    other["seed"] = 6;
    const PreparedExperiment d = prepare(parse_config(other, "."));
    CHECK(d.dataset.samples != a.dataset.samples);

    json pinned = synthetic_config();
    pinned["dataset"]["seed"] = 1;
    json pinned2 = pinned;
    pinned2["seed"] = 9;
    CHECK(prepare(parse_config(pinned, ".")).dataset == prepare(parse_config(pinned2, ".")).dataset);
}

TEST_CASE("parallel jobs reproduce sequential results") {
    const ExperimentConfig c = parse_config(synthetic_config(), ".");
    const PreparedExperiment p = prepare(c);
    const auto runs = expand_runs(c);
    const auto seq = run_all(p, runs, c.options, 1);
    const auto par = run_all(p, runs, c.options, 4);
    REQUIRE(seq.size() == par.size());
    for (std::size_t i = 0; i < seq.size(); ++i) CHECK(report_to_json(seq[i], false) == report_to_json(par[i], false));
}

TEST_CASE("data paths resolve against the config directory, then the data root") {
    testing::TempDir cfg_dir;
    testing::TempDir data_dir;
    testing::write_file(data_dir / "feat.csv", "label,f0,f1\na,1,2\nb,3,4\na,5,6\nb,7,8\n");
    CHECK(resolve_data_path("feat.csv", cfg_dir.path()) == cfg_dir / "feat.csv");
    ::setenv("OLBENCH_DATA_DIR", data_dir.path().c_str(), 1);
    CHECK(resolve_data_path("feat.csv", cfg_dir.path()) == data_dir / "feat.csv");
    testing::write_file(cfg_dir / "feat.csv", "label,f0,f1\na,1,2\n");
    CHECK(resolve_data_path("feat.csv", cfg_dir.path()) == cfg_dir / "feat.csv");
    ::unsetenv("OLBENCH_DATA_DIR");
    CHECK(resolve_data_path("/abs/x.csv", cfg_dir.path()) == "/abs/x.csv");
}

TEST_CASE("csv dataset with a model head") {
    testing::TempDir dir;
    testing::write_file(dir / "feat.csv", "label,f0,f1\na,1,0\nb,0,1\nc,1,1\na,1,0\nb,0,1\nc,1,1\n");
    testing::write_file(dir / "head.olm", "olmodel v1\ninput 2\nhead 2 2 a b\n1 0\n0 1\n0 0\n");
    testing::write_file(dir / "cfg.json", R"({
        "dataset": {"kind": "csv", "path": "feat.csv", "id": "tiny"},
        "model": "head.olm",
        "strategy": "tinyol",
        "seed": 1,
        "pseudo_test": 3
    })");
    const ExperimentConfig c = load_config(dir / "cfg.json");
    const PreparedExperiment p = prepare(c);
    CHECK_FALSE(p.model.has_value());  // precomputed features: model only supplies the head
    CHECK(p.head.labels == std::vector<std::string>{"a", "b"});
    CHECK(p.dataset.id == "tiny");
    const auto reports = run_all(p, expand_runs(c), c.options);
    CHECK(reports.at(0).scored == 3);
    CHECK(reports.at(0).peak_classes == 3);
}

TEST_CASE("missing dataset file fails in prepare") {
    testing::TempDir dir;
    testing::write_file(dir / "cfg.json", R"({
        "dataset": {"kind": "csv", "path": "missing.csv"},
        "warmup": {"path": "missing.csv"}
    })");
    CHECK_THROWS_AS(prepare(load_config(dir / "cfg.json")), ParseError);
}
