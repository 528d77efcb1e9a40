#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "olbench/frozen_model.hpp"
#include "olbench/report.hpp"
#include "support.hpp"

using namespace olbench;
namespace fs = std::filesystem;

namespace {

struct Result {
    int status = -1;
    std::string out;
    std::string err;
};

Result cli(const testing::TempDir& dir, const std::string& args) {
    const auto out = dir / "stdout.txt";
    const auto err = dir / "stderr.txt";
    const std::string cmd = std::string(OLBENCH_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    Result r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = testing::read_file(out);
    r.err = testing::read_file(err);
    return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

const char* kSyntheticConfig = R"({
    "dataset": {"kind": "synthetic", "classes": 6, "features": 16, "samples_per_class": 60, "spread": 1.0},
    "warmup": {"classes": 4, "samples_per_class": 30},
    "strategy": "tinyol",
    "alpha": 0.01,
    "batch": 8,
    "seed": 3,
    "pseudo_test": 0.8
})";

// Dense 6 -> 4 relu extractor with a 2-class head, plus a raw 6-column CSV of 3 classes.
void write_dense_fixture(const testing::TempDir& dir) {
    Rng rng(70);
    FrozenModel model(Shape::flat(6), {DenseLayer{testing::random_mat(rng, 4, 6, 0.5), testing::random_vec(rng, 4, 0.1)},
                                       ReluLayer{}});
    HeadSeed head = testing::random_head(rng, 2, 4, "r", 0.5);
    std::ostringstream m;
    write_model(m, model, head);
    testing::write_file(dir / "dense.olm", m.str());

    std::ostringstream csv;
    csv << "label,f0,f1,f2,f3,f4,f5\n";
    for (int i = 0; i < 90; ++i) {
        const int c = i % 3;
        csv << "r" << c;
        for (int j = 0; j < 6; ++j) csv << ',' << (j == 2 * c ? 2.0 : 0.0) + 0.3 * rng.normal();
        csv << '\n';
    }
    testing::write_file(dir / "raw.csv", csv.str());
}

}  // namespace

TEST_CASE("run writes a valid report") {
    testing::TempDir dir;
    testing::write_file(dir / "cfg.json", kSyntheticConfig);
    const Result r = cli(dir, "run --config " + q(dir / "cfg.json") + " --out " + q(dir / "report.json"));
    CHECK(r.status == 0);
    REQUIRE(fs::exists(dir / "report.json"));
    const RunReport report = load_report(dir / "report.json");
    CHECK(report.accuracy >= 0.0);
    CHECK(report.accuracy <= 1.0);
    CHECK(report.strategy == "tinyol");
    CHECK(r.out.find("tinyol") != std::string::npos);
    CHECK(r.out.find("accuracy") != std::string::npos);
    CHECK(r.out.find("peak-ol") != std::string::npos);
}

TEST_CASE("command-line flags override the config") {
    testing::TempDir dir;
    testing::write_file(dir / "cfg.json", kSyntheticConfig);
    const Result r = cli(dir, "run --config " + q(dir / "cfg.json") +
                                  " --strategy cwr --alpha 0.05 --batch 16 --seed 9 --pseudo-test 300"
                                  " --freeze-during-test --out " +
                                  q(dir / "o.json"));
    REQUIRE(r.status == 0);
    const RunReport report = load_report(dir / "o.json");
    CHECK(report.strategy == "cwr");
    CHECK(report.learning_rate == 0.05f);
    CHECK(report.batch_size == 16);
    CHECK(report.seed == 9);
    CHECK(report.pseudo_test_start == 300);
    CHECK(report.freeze_during_test);
}

TEST_CASE("missing dataset gives a nonzero exit and no report") {
    testing::TempDir dir;
    testing::write_file(dir / "cfg.json", R"({"dataset": {"kind": "csv", "path": "nope.csv"}, "head": "h.olm"})");
    const Result r = cli(dir, "run --config " + q(dir / "cfg.json") + " --out " + q(dir / "report.json"));
    CHECK(r.status != 0);
    CHECK(r.err.find("nope.csv") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "report.json"));
    CHECK_FALSE(fs::exists(dir / "report.json.partial"));
}

TEST_CASE("unknown flags and missing verbs are rejected") {
    testing::TempDir dir;
    CHECK(cli(dir, "").status != 0);
    CHECK(cli(dir, "run --config x.json --frobnicate").status != 0);
    CHECK(cli(dir, "launch").status != 0);
}

TEST_CASE("multi-run invocation and compare") {
    testing::TempDir dir;
    std::string cfg = kSyntheticConfig;
    testing::write_file(dir / "cfg.json", cfg);
    const Result r = cli(dir, "run --config " + q(dir / "cfg.json") + " --strategy all --jobs 3 --out " +
                                  q(dir / "reports"));
    REQUIRE(r.status == 0);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir / "reports")) files.push_back(q(e.path()));
    REQUIRE(files.size() == 7);
    CHECK(fs::exists(dir / "reports" / "cfg_cwr_a0.01_k8_s3.json"));

    std::string all;
    for (const auto& f : files) all += " " + f;
    const Result c = cli(dir, "compare" + all + " --out " + q(dir / "table"));
    REQUIRE(c.status == 0);
    for (const char* ext : {".md", ".csv", ".json", "_per_class.csv"}) {
        CHECK(fs::exists(dir.path() / (std::string("table") + ext)));
    }
    const std::string csv = testing::read_file(dir / "table.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.rfind("metric,TinyOL,TinyOL batches,TinyOL v2,TinyOL v2 batches,LWF,LWF batches,CWR", 0) == 0);
    CHECK(c.out.find("Accuracy (%)") != std::string::npos);

    const Result one = cli(dir, "compare " + files[0] + " --out " + q(dir / "one"));
    REQUIRE(one.status == 0);
    const std::string one_csv = testing::read_file(dir / "one.csv");
    CHECK(std::count(one_csv.begin(), one_csv.end(), '\n') == 4);
    CHECK(std::count(one_csv.begin(), one_csv.end(), ',') == 4);
}

TEST_CASE("compare refuses mixed datasets") {
    testing::TempDir dir;
    testing::write_file(dir / "a.json", kSyntheticConfig);
    std::string other = kSyntheticConfig;
    other.replace(other.find("\"seed\": 3"), 9, "\"seed\": 4");
    testing::write_file(dir / "b.json", other);
    REQUIRE(cli(dir, "run --config " + q(dir / "a.json") + " --out " + q(dir / "ra.json")).status == 0);
    REQUIRE(cli(dir, "run --config " + q(dir / "b.json") + " --out " + q(dir / "rb.json")).status == 0);
    const Result c = cli(dir, "compare " + q(dir / "ra.json") + " " + q(dir / "rb.json") + " --out " + q(dir / "t"));
    CHECK(c.status != 0);
    CHECK_FALSE(fs::exists(dir / "t.csv"));
}

TEST_CASE("gen-synthetic is deterministic") {
    testing::TempDir dir;
    const std::string args = "gen-synthetic --classes 3 --features 5 --samples-per-class 4 --seed 11 --out ";
    REQUIRE(cli(dir, args + q(dir / "a.csv")).status == 0);
    REQUIRE(cli(dir, args + q(dir / "b.csv")).status == 0);
    const std::string a = testing::read_file(dir / "a.csv");
    CHECK(a == testing::read_file(dir / "b.csv"));
    CHECK(a.rfind("label,f0,f1,f2,f3,f4\n", 0) == 0);
    CHECK(std::count(a.begin(), a.end(), '\n') == 13);
}

TEST_CASE("inspect-model prints the layer chain") {
    testing::TempDir dir;
    write_dense_fixture(dir);
    const Result r = cli(dir, "inspect-model " + q(dir / "dense.olm"));
    CHECK(r.status == 0);
    CHECK(r.out.find("dense") != std::string::npos);
    CHECK(r.out.find("head 2x4") != std::string::npos);
}

TEST_CASE("export-features writes the feature csv deterministically") {
    testing::TempDir dir;
    write_dense_fixture(dir);
    const std::string args = "export-features --model " + q(dir / "dense.olm") + " --csv " + q(dir / "raw.csv");
    REQUIRE(cli(dir, args + " --out " + q(dir / "f1.csv")).status == 0);
    REQUIRE(cli(dir, args + " --out " + q(dir / "f2.csv")).status == 0);
    const std::string f1 = testing::read_file(dir / "f1.csv");
    CHECK(f1 == testing::read_file(dir / "f2.csv"));
    CHECK(f1.rfind("label,f0,f1,f2,f3\n", 0) == 0);
    CHECK(std::count(f1.begin(), f1.end(), '\n') == 91);

    const LoadedModel m = load_model(dir / "dense.olm");
    std::istringstream raw_in(testing::read_file(dir / "raw.csv"));
    std::istringstream feat_in(f1);
    const Dataset raw = read_feature_csv(raw_in, "raw");
    const Dataset feat = read_feature_csv(feat_in, "feat");
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(feat.samples[i].input == m.model.forward(raw.samples[i].input));

    CHECK(cli(dir, "export-features --model " + q(dir / "dense.olm") + " --out " + q(dir / "f3.csv")).status != 0);
    CHECK_FALSE(fs::exists(dir / "f3.csv"));
}

TEST_CASE("exported features through run equal raw inputs through the model") {
    testing::TempDir dir;
    write_dense_fixture(dir);
    REQUIRE(cli(dir, "export-features --model " + q(dir / "dense.olm") + " --csv " + q(dir / "raw.csv") + " --out " +
                         q(dir / "feat.csv"))
                .status == 0);
    testing::write_file(dir / "raw.json", R"({
        "dataset": {"kind": "csv", "path": "raw.csv", "raw": true, "id": "fixture"},
        "model": "dense.olm", "strategy": "all", "alpha": 0.05, "batch": 4, "seed": 2, "pseudo_test": 0.5
    })");
    testing::write_file(dir / "feat.json", R"({
        "dataset": {"kind": "csv", "path": "feat.csv", "id": "fixture"},
        "model": "dense.olm", "strategy": "all", "alpha": 0.05, "batch": 4, "seed": 2, "pseudo_test": 0.5
    })");
    REQUIRE(cli(dir, "run --config " + q(dir / "raw.json") + " --out " + q(dir / "raw_out")).status == 0);
    REQUIRE(cli(dir, "run --config " + q(dir / "feat.json") + " --out " + q(dir / "feat_out")).status == 0);
    for (const auto& e : fs::directory_iterator(dir / "raw_out")) {
        std::string name = e.path().filename().string();
        name.replace(0, 3, "feat");
        const RunReport a = load_report(e.path());
        const RunReport b = load_report(dir / "feat_out" / name);
        CHECK(report_to_json(a, false) == report_to_json(b, false));
    }
}

TEST_CASE("export-features from idx files") {
    testing::TempDir dir;
    std::string images, labels;
    auto be32 = [](std::string& s, std::uint32_t v) {
        for (int sh = 24; sh >= 0; sh -= 8) s.push_back(static_cast<char>((v >> sh) & 0xff));
    };
    be32(images, 0x803);
    be32(images, 12);
    be32(images, 4);
    be32(images, 4);
    for (int i = 0; i < 12 * 16; ++i) images.push_back(static_cast<char>((i * 37) % 256));
    be32(labels, 0x801);
    be32(labels, 12);
    for (int i = 0; i < 12; ++i) labels.push_back(static_cast<char>(i % 10));
    testing::write_file(dir / "img", images);
    testing::write_file(dir / "lbl", labels);
    testing::write_file(dir / "cnn.olm",
                        "olmodel v1\ninput 4 4 1\nlayer conv2d 2 3 3 1 same\n"
                        "1 0 0 0 1 0 0 0 1\n0 0 0 0 2 0 0 0 0\n0 0.5\nlayer relu\nlayer maxpool2x2\nlayer flatten\n"
                        "head 1 8 0\n1 1 1 1 1 1 1 1\n0\n");
    const Result r = cli(dir, "export-features --model " + q(dir / "cnn.olm") + " --mnist-images " + q(dir / "img") +
                                  " --mnist-labels " + q(dir / "lbl") + " --keep 0,1,2 --out " + q(dir / "f.csv"));
    REQUIRE(r.status == 0);
    const std::string f = testing::read_file(dir / "f.csv");
    CHECK(f.rfind("label,f0,f1,f2,f3,f4,f5,f6,f7\n", 0) == 0);
    CHECK(std::count(f.begin(), f.end(), '\n') == 1 + 5);
}
