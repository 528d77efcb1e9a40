#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "olbench/dataset.hpp"
#include "olbench/frozen_model.hpp"
#include "olbench/strategies.hpp"

namespace olbench {

/// Where online scoring starts: a fraction of the stream (floored) or an explicit index.
struct TestBoundary {
    enum class Mode { fraction, index } mode = Mode::fraction;
    double fraction = 0.8;
    std::size_t index = 0;

    static TestBoundary at_fraction(double f) { return {Mode::fraction, f, 0}; }
    static TestBoundary at_index(std::size_t i) { return {Mode::index, 0.0, i}; }
};

/// Shuffled visiting order over a dataset plus the first scored position.
struct StreamPlan {
    std::vector<std::size_t> order;
    std::size_t pseudo_test_start = 0;
    std::uint64_t seed = 0;
};

/// Throws ValidationError for an empty dataset, a fraction outside (0, 1) or an
/// index outside [0, size).
StreamPlan build_stream(std::size_t dataset_size, std::uint64_t seed, TestBoundary boundary);
inline StreamPlan build_stream(const Dataset& dataset, std::uint64_t seed, TestBoundary boundary) {
    return build_stream(dataset.size(), seed, boundary);
}

inline constexpr const char* kReportSchema = "olbench-report/1";

struct TimingStats {
    std::size_t count = 0;
    double mean_ms = 0.0;
    double min_ms = 0.0;
    double max_ms = 0.0;

    void add(double ms);
};

struct ClassScore {
    std::string label;
    std::size_t correct = 0;
    std::size_t total = 0;

    double accuracy() const noexcept { return total ? static_cast<double>(correct) / total : 0.0; }
    friend bool operator==(const ClassScore&, const ClassScore&) = default;
};

struct RunReport {
    std::string schema = kReportSchema;
    // run metadata
    std::string strategy;
    float learning_rate = 0.0f;
    std::size_t batch_size = 0;
    std::uint64_t seed = 0;
    std::string dataset_id;
    std::size_t dataset_size = 0;
    std::size_t pseudo_test_start = 0;
    bool freeze_during_test = false;
    std::size_t initial_classes = 0;
    std::vector<std::string> class_arrival;  // final row order of the head
    // scores over the pseudo-test region
    std::size_t scored = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
    std::vector<std::string> confusion_labels;        // sorted
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    std::vector<ClassScore> per_class;                // classes with >= 1 scored sample
    // resources
    std::size_t peak_ol_bytes = 0;
    std::size_t peak_classes = 0;
    TimingStats forward_time;
    TimingStats ol_step_time;

    /// Throws ValidationError if confusion/accuracy bookkeeping is inconsistent.
    void validate() const;
};

struct RunOptions {
    /// Stop training once scoring starts (pure hold-out tail instead of test-then-train).
    bool freeze_during_test = false;
    std::size_t max_classes = kDefaultMaxClasses;
};

/// Streams the dataset in plan order. Each sample goes through the frozen
/// model (or is used as-is when `model` is null), is scored if its position
/// is >= plan.pseudo_test_start, and is then used for one training step.
RunReport run_experiment(const FrozenModel* model, const HeadSeed& head, const Dataset& dataset,
                         const StreamPlan& plan, const StrategyConfig& config, const RunOptions& options = {});

/// Builds a head from scratch by streaming `warmup` (precomputed features)
/// through an initially empty layer for `epochs` shuffled passes. Rows follow
/// the labels' first appearance in `warmup`.
HeadSeed fit_head(const Dataset& warmup, const StrategyConfig& config, std::uint64_t seed, std::size_t epochs = 1);

}  // namespace olbench
