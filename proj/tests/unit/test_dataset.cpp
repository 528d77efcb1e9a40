#include <Eigen/Dense>
#include <sstream>

#include "doctest.h"
#include "olbench/dataset.hpp"
#include "olbench/errors.hpp"
#include "olbench/experiment.hpp"
#include "support.hpp"

using namespace olbench;

namespace {

void put_be32(std::string& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

struct IdxFixture {
    std::string images;
    std::string labels;
};

// count images of rows x cols; pixel value = (index + position) mod 256, label = index mod 10.
IdxFixture make_idx(std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
    IdxFixture f;
    put_be32(f.images, kIdxImagesMagic);
    put_be32(f.images, count);
    put_be32(f.images, rows);
    put_be32(f.images, cols);
    for (std::uint32_t i = 0; i < count; ++i) {
        for (std::uint32_t p = 0; p < rows * cols; ++p) f.images.push_back(static_cast<char>((i + p) % 256));
    }
    put_be32(f.labels, kIdxLabelsMagic);
    put_be32(f.labels, count);
    for (std::uint32_t i = 0; i < count; ++i) f.labels.push_back(static_cast<char>(i % 10));
    return f;
}

struct IdxFiles {
    testing::TempDir dir;
    std::filesystem::path images, labels;

    explicit IdxFiles(const IdxFixture& f) : images(dir / "img.idx"), labels(dir / "lbl.idx") {
        testing::write_file(images, f.images);
        testing::write_file(labels, f.labels);
    }
};

}  // namespace

TEST_CASE("idx loader reads images, labels and scaling") {
    IdxFiles files(make_idx(30, 28, 28));
    const Dataset ds = load_mnist_idx(files.images, files.labels);
    CHECK(ds.size() == 30);
    CHECK(ds.kind == InputKind::image_plane);
    CHECK(ds.shape == Shape::image(28, 28, 1));
    CHECK(ds.samples[13].label == "3");
    CHECK(ds.samples[13].input[0] == 13.0f / 255.0f);
    CHECK(ds.samples[13].input[5] == 18.0f / 255.0f);
    CHECK(ds.samples[0].input[255] == 1.0f);
}

TEST_CASE("idx keep set filters labels") {
    IdxFiles files(make_idx(40, 4, 4));
    const Dataset low = load_mnist_idx(files.images, files.labels, std::set<std::string>{"0", "1", "2", "3", "4", "5"});
    CHECK(low.size() == 24);
    for (const auto& s : low.samples) CHECK(s.label[0] <= '5');

    const Dataset none = load_mnist_idx(files.images, files.labels, std::set<std::string>{});
    CHECK(none.size() == 0);
    CHECK_NOTHROW(none.validate());
}

TEST_CASE("idx format errors") {
    IdxFixture bad_magic = make_idx(3, 2, 2);
    bad_magic.images[3] = 0x01;
    {
        IdxFiles files(bad_magic);
        CHECK_THROWS_WITH_AS(load_mnist_idx(files.images, files.labels), doctest::Contains("bad magic"), ParseError);
    }
    IdxFixture swapped = make_idx(3, 2, 2);
    std::swap(swapped.images, swapped.labels);
    {
        IdxFiles files(swapped);
        CHECK_THROWS_AS(load_mnist_idx(files.images, files.labels), ParseError);
    }
    IdxFixture truncated = make_idx(3, 2, 2);
    truncated.images.pop_back();
    {
        IdxFiles files(truncated);
        CHECK_THROWS_WITH_AS(load_mnist_idx(files.images, files.labels), doctest::Contains("truncated"),
                             ParseError);
    }
    IdxFixture mismatch = make_idx(3, 2, 2);
    mismatch.labels[7] = 2;
    {
        IdxFiles files(mismatch);
        CHECK_THROWS_AS(load_mnist_idx(files.images, files.labels), ParseError);
    }
    IdxFixture bad_label = make_idx(3, 2, 2);
    bad_label.labels[9] = 11;
    {
        IdxFiles files(bad_label);
        CHECK_THROWS_WITH_AS(load_mnist_idx(files.images, files.labels), doctest::Contains("offset 9"), ParseError);
    }
    CHECK_THROWS_AS(load_mnist_idx("/nonexistent/img", "/nonexistent/lbl"), ParseError);
}

TEST_CASE("feature csv reading") {
    std::istringstream ok("label,f0,f1,f2,f3\na,1,2,3,4\nb,0.5,-1,1e-3,7\na,0,0,0,0\n");
    const Dataset ds = read_feature_csv(ok, "feat.csv");
    CHECK(ds.size() == 3);
    CHECK(ds.shape == Shape::flat(4));
    CHECK(ds.samples[1].input == Vec{0.5f, -1.0f, 1e-3f, 7.0f});
    CHECK(ds.labels() == std::vector<std::string>{"a", "b"});
    CHECK(ds.id == "csv:feat.csv");

    std::istringstream short_row("label,f0,f1,f2,f3\na,1,2,3,4\nb,1,2,3\n");
    CHECK_THROWS_WITH_AS(read_feature_csv(short_row, "feat.csv"), doctest::Contains("feat.csv:3"), ParseError);
    std::istringstream bad_value("label,f0\na,zz\n");
    CHECK_THROWS_AS(read_feature_csv(bad_value, "x"), ParseError);
    std::istringstream bad_header("y,f0\na,1\n");
    CHECK_THROWS_AS(read_feature_csv(bad_header, "x"), ParseError);
    std::istringstream empty("");
    CHECK_THROWS_AS(read_feature_csv(empty, "x"), ParseError);
}

TEST_CASE("feature csv round trip preserves every float") {
    Rng rng(50);
    Dataset ds{"csv:x", InputKind::precomputed_features, Shape::flat(6), {}};
    for (int i = 0; i < 40; ++i) ds.samples.push_back({testing::random_vec(rng, 6, 1e3), "L" + std::to_string(i % 4)});
    ds.samples[0].input[0] = 1e-38f;
    ds.samples[0].input[1] = -0.0f;
    ds.samples[0].input[2] = 3.4e38f;
    std::stringstream buf;
    write_feature_csv(buf, ds);
    const Dataset back = read_feature_csv(buf, "x");
    CHECK(back.samples == ds.samples);
}

namespace {

SyntheticSpec small_spec(float spread, std::uint64_t seed = 7) {
    SyntheticSpec s;
    s.labels = default_class_labels(8);
    s.feature_len = 128;
    s.means = random_class_means(8, 128, 1.0f, 99);
    s.spread = spread;
    s.samples_per_class = 100;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("synthetic generator") {
    const Dataset a = gen_synthetic(small_spec(0.5f));
    const Dataset b = gen_synthetic(small_spec(0.5f));
    CHECK(a == b);
    CHECK(a.size() == 800);
    CHECK(a.labels() == default_class_labels(8));
    CHECK(gen_synthetic(small_spec(0.5f, 8)).samples != a.samples);

    // Vanishing spread: every sample sits on its class mean.
    const SyntheticSpec tight = small_spec(1e-30f);
    const Dataset t = gen_synthetic(tight);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t.samples[i].input == tight.means[i / 100]);

    SyntheticSpec bad = small_spec(0.0f);
    CHECK_THROWS_AS(gen_synthetic(bad), ValidationError);
    bad = small_spec(1.0f);
    bad.labels.resize(1);
    bad.means.resize(1);
    CHECK_THROWS_AS(gen_synthetic(bad), ValidationError);
}

TEST_CASE("synthetic classes are linearly separable by least squares") {
    const Dataset ds = gen_synthetic(small_spec(0.5f));
    const std::size_t n = ds.size(), m = ds.shape.size();
    Eigen::MatrixXd x(n, m + 1);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, 8);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) x(i, j) = ds.samples[i].input[j];
        x(i, m) = 1.0;
        y(i, i / 100) = 1.0;
    }
    const Eigen::MatrixXd w = x.colPivHouseholderQr().solve(y);
    const Dataset test = gen_synthetic(small_spec(0.5f, 1234));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        Eigen::RowVectorXd row(m + 1);
        for (std::size_t j = 0; j < m; ++j) row(j) = test.samples[i].input[j];
        row(m) = 1.0;
        Eigen::Index best;
        (row * w).maxCoeff(&best);
        correct += static_cast<std::size_t>(best) == i / 100;
    }
    CHECK(static_cast<double>(correct) / test.size() >= 0.99);
}

TEST_CASE("stream boundaries") {
    CHECK(build_stream(4249, 1, TestBoundary::at_fraction(0.8)).pseudo_test_start == 3399);
    CHECK(build_stream(5000, 1, TestBoundary::at_index(4000)).pseudo_test_start == 4000);
    CHECK_THROWS_AS(build_stream(100, 1, TestBoundary::at_fraction(0.0)), ValidationError);
    CHECK_THROWS_AS(build_stream(100, 1, TestBoundary::at_fraction(1.0)), ValidationError);
    CHECK_THROWS_AS(build_stream(100, 1, TestBoundary::at_index(100)), ValidationError);
    CHECK_THROWS_AS(build_stream(0, 1, TestBoundary::at_fraction(0.5)), ValidationError);

    const StreamPlan a = build_stream(500, 9, TestBoundary::at_fraction(0.8));
    const StreamPlan b = build_stream(500, 9, TestBoundary::at_fraction(0.8));
    CHECK(a.order == b.order);
    auto sorted = a.order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
    CHECK(build_stream(500, 10, TestBoundary::at_fraction(0.8)).order != a.order);
}
