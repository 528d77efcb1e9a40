#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "olbench/dataset.hpp"
#include "olbench/experiment.hpp"
#include "olbench/frozen_model.hpp"
#include "olbench/strategies.hpp"

namespace olbench {

struct DatasetSpec {
    enum class Source { synthetic, csv, mnist } source = Source::synthetic;
    std::optional<std::string> id;
    // synthetic
    std::size_t classes = 8;
    std::size_t features = 128;
    std::size_t samples_per_class = 500;
    float spread = 2.0f;
    float mean_scale = 1.0f;
    std::optional<std::uint64_t> seed;
    // csv
    std::filesystem::path path;
    bool raw = false;
    std::optional<Shape> shape;  // reinterpretation of raw CSV rows, e.g. 28x28x1
    // mnist
    std::filesystem::path images;
    std::filesystem::path labels;
    std::optional<std::set<std::string>> keep;
    std::optional<std::size_t> per_class;  // cap per label, first samples in file order
};

/// Builds the initial head by streaming a warm-up set through an empty layer.
struct WarmupSpec {
    std::size_t classes = 5;  // synthetic: first N classes share the dataset's means
    std::size_t samples_per_class = 100;
    std::filesystem::path path;  // non-synthetic: feature CSV to train on
    StrategyConfig strategy{StrategyKind::tinyol, 0.01f, 16};
    std::size_t epochs = 1;
};

/// One experiment file. Strategy, learning rate and batch size may be lists;
/// the run set is their cartesian product.
struct ExperimentConfig {
    std::filesystem::path source;  // config file, for naming outputs
    DatasetSpec dataset;
    std::optional<std::filesystem::path> model;
    std::optional<std::filesystem::path> head;
    std::optional<WarmupSpec> warmup;
    std::vector<StrategyKind> strategies{StrategyKind::tinyol};
    std::vector<float> learning_rates{0.01f};
    std::vector<std::size_t> batch_sizes{16};
    std::uint64_t seed = 0;
    TestBoundary boundary = TestBoundary::at_fraction(0.8);
    RunOptions options;
    std::filesystem::path out = "report.json";
};

/// Command-line overrides; unset fields leave the config untouched.
struct ConfigOverrides {
    std::optional<std::string> strategy;  // a name or "all"
    std::optional<float> learning_rate;
    std::optional<std::size_t> batch_size;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> pseudo_test;  // fraction "0.8" or index "4000"
    bool freeze_during_test = false;
    std::optional<std::filesystem::path> out;
};

/// Parses a JSON config. Relative paths resolve against `base_dir`, falling
/// back to $OLBENCH_DATA_DIR when the file is not found there.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);
void apply_overrides(ExperimentConfig& config, const ConfigOverrides& overrides);

/// "0.8" -> fraction, "4000" -> index.
TestBoundary parse_boundary(const std::string& text);

std::filesystem::path resolve_data_path(const std::filesystem::path& path, const std::filesystem::path& base_dir);

std::vector<StrategyConfig> expand_runs(const ExperimentConfig& config);

/// Materialised inputs shared by every run of one config.
struct PreparedExperiment {
    Dataset dataset;
    std::optional<FrozenModel> model;
    HeadSeed head;
    StreamPlan plan;
};

PreparedExperiment prepare(const ExperimentConfig& config);
Dataset load_dataset(const DatasetSpec& spec, std::uint64_t master_seed);

struct RunJob {
    const PreparedExperiment* prepared = nullptr;
    StrategyConfig config;
    RunOptions options;
};

/// Runs independent jobs, up to `jobs` at a time. Each run owns its learner
/// state; prepared inputs are shared read-only. Results keep input order and
/// the first failure is rethrown after all workers stop.
std::vector<RunReport> run_jobs(std::span<const RunJob> work, std::size_t jobs = 1);

/// run_jobs() over every expanded configuration of one prepared experiment.
std::vector<RunReport> run_all(const PreparedExperiment& prepared, std::span<const StrategyConfig> runs,
                               const RunOptions& options, std::size_t jobs = 1);

}  // namespace olbench
