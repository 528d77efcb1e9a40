#include "olbench/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "olbench/errors.hpp"

namespace olbench {

StreamPlan build_stream(std::size_t dataset_size, std::uint64_t seed, TestBoundary boundary) {
    if (dataset_size == 0) throw ValidationError("cannot build a stream over an empty dataset");
    StreamPlan plan;
    plan.seed = seed;
    plan.order.resize(dataset_size);
    std::iota(plan.order.begin(), plan.order.end(), std::size_t{0});
    Rng rng(seed);
    shuffle(plan.order, rng);

    if (boundary.mode == TestBoundary::Mode::fraction) {
        if (!(boundary.fraction > 0.0 && boundary.fraction < 1.0)) {
            throw ValidationError("pseudo-test fraction must lie strictly between 0 and 1");
        }
        const auto start = static_cast<std::size_t>(std::floor(boundary.fraction * static_cast<double>(dataset_size)));
        plan.pseudo_test_start = std::min(start, dataset_size - 1);
    } else {
        if (boundary.index >= dataset_size) {
            throw ValidationError("pseudo-test index " + std::to_string(boundary.index) + " outside a stream of " +
                                  std::to_string(dataset_size) + " samples");
        }
        plan.pseudo_test_start = boundary.index;
    }
    return plan;
}

void TimingStats::add(double ms) {
    if (count == 0) {
        min_ms = max_ms = ms;
    } else {
        min_ms = std::min(min_ms, ms);
        max_ms = std::max(max_ms, ms);
    }
    ++count;
    mean_ms += (ms - mean_ms) / static_cast<double>(count);
}

void RunReport::validate() const {
    const std::size_t n = confusion_labels.size();
    if (confusion.size() != n) throw ValidationError("report: confusion matrix has the wrong number of rows");
    std::size_t total = 0;
    std::size_t trace = 0;
    std::map<std::string, std::size_t> row_sums;
    for (std::size_t i = 0; i < n; ++i) {
        if (confusion[i].size() != n) throw ValidationError("report: confusion matrix is not square");
        const std::size_t row = std::accumulate(confusion[i].begin(), confusion[i].end(), std::size_t{0});
        row_sums[confusion_labels[i]] = row;
        total += row;
        trace += confusion[i][i];
    }
    if (total != scored) throw ValidationError("report: confusion total differs from the scored count");
    if (trace != correct) throw ValidationError("report: confusion trace differs from the correct count");
    if (scored != dataset_size - pseudo_test_start) {
        throw ValidationError("report: scored count differs from the pseudo-test region size");
    }
    const double expected = scored ? static_cast<double>(correct) / static_cast<double>(scored) : 0.0;
    if (accuracy != expected) throw ValidationError("report: accuracy is not trace / total");
    for (const auto& c : per_class) {
        if (row_sums[c.label] != c.total) {
            throw ValidationError("report: per-class total for '" + c.label + "' differs from its confusion row");
        }
    }
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

}  // namespace

RunReport run_experiment(const FrozenModel* model, const HeadSeed& head, const Dataset& dataset,
                         const StreamPlan& plan, const StrategyConfig& config, const RunOptions& options) {
    config.validate();
    dataset.validate();
    const bool raw = dataset.kind != InputKind::precomputed_features;
    if (raw && model == nullptr) {
        throw ValidationError("dataset " + dataset.id + " holds raw inputs; a frozen model is required");
    }
    if (!raw && model != nullptr) {
        throw ValidationError("dataset " + dataset.id + " holds precomputed features; no frozen model may be given");
    }
    if (model != nullptr && model->input_shape().size() != dataset.shape.size()) {
        throw ShapeError("model input " + model->input_shape().str() + " does not match dataset shape " +
                         dataset.shape.str());
    }
    const std::size_t feature_len = model ? model->feature_len() : dataset.shape.size();
    if (head.weights.cols() != feature_len) {
        throw ShapeError("head expects " + std::to_string(head.weights.cols()) + " features, extractor produces " +
                         std::to_string(feature_len));
    }
    if (plan.order.size() != dataset.size() || plan.pseudo_test_start >= dataset.size()) {
        throw ValidationError("stream plan does not match dataset " + dataset.id);
    }

    OnlineLearner learner(head, config, options.max_classes);

    RunReport report;
    report.strategy = std::string(to_string(config.kind));
    report.learning_rate = config.learning_rate;
    report.batch_size = config.batch_size;
    report.seed = plan.seed;
    report.dataset_id = dataset.id;
    report.dataset_size = dataset.size();
    report.pseudo_test_start = plan.pseudo_test_start;
    report.freeze_during_test = options.freeze_during_test;
    report.initial_classes = head.labels.size();
    report.peak_ol_bytes = learner.memory_bytes();
    report.peak_classes = learner.layer().num_classes();

    std::vector<std::pair<std::string, std::string>> scored;  // (truth, predicted)
    scored.reserve(dataset.size() - plan.pseudo_test_start);

    for (std::size_t pos = 0; pos < plan.order.size(); ++pos) {
        const Sample& sample = dataset.samples[plan.order[pos]];
        const bool testing = pos >= plan.pseudo_test_start;
        // A frozen tail must see the pending partial batch applied.
        if (options.freeze_during_test && pos == plan.pseudo_test_start) learner.finish();

        Vec extracted;
        std::span<const float> features = sample.input;
        if (model) {
            const auto t0 = Clock::now();
            extracted = model->forward(sample.input);
            report.forward_time.add(elapsed_ms(t0));
            features = extracted;
        }

        if (testing) scored.emplace_back(sample.label, learner.predict(features).label);

        if (!(testing && options.freeze_during_test)) {
            const auto t0 = Clock::now();
            learner.train_step(features, sample.label);
            report.ol_step_time.add(elapsed_ms(t0));
            report.peak_ol_bytes = std::max(report.peak_ol_bytes, learner.memory_bytes());
            report.peak_classes = std::max(report.peak_classes, learner.layer().num_classes());
        }
    }
    learner.finish();

    report.class_arrival = learner.layer().labels();
    // Sorted axis: the scored region's tables must not depend on arrival order.
    std::set<std::string> axis_labels(report.class_arrival.begin(), report.class_arrival.end());
    for (const auto& [truth, predicted] : scored) {
        axis_labels.insert(truth);
        axis_labels.insert(predicted);
    }
    report.confusion_labels.assign(axis_labels.begin(), axis_labels.end());
    std::map<std::string, std::size_t> axis;
    for (std::size_t i = 0; i < report.confusion_labels.size(); ++i) axis[report.confusion_labels[i]] = i;
    const std::size_t n = report.confusion_labels.size();
    report.confusion.assign(n, std::vector<std::size_t>(n, 0));
    for (const auto& [truth, predicted] : scored) ++report.confusion[axis[truth]][axis[predicted]];

    report.scored = scored.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t total = std::accumulate(report.confusion[i].begin(), report.confusion[i].end(), std::size_t{0});
        report.correct += report.confusion[i][i];
        if (total > 0) report.per_class.push_back({report.confusion_labels[i], report.confusion[i][i], total});
    }
    report.accuracy =
        report.scored ? static_cast<double>(report.correct) / static_cast<double>(report.scored) : 0.0;
    report.validate();
    return report;
}

HeadSeed fit_head(const Dataset& warmup, const StrategyConfig& config, std::uint64_t seed, std::size_t epochs) {
    if (warmup.kind != InputKind::precomputed_features) {
        throw ValidationError("fit_head expects precomputed features");
    }
    warmup.validate();
    HeadSeed empty{Mat(0, warmup.shape.size()), {}, {}};
    OnlineLearner learner(empty, config);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::vector<std::size_t> order(warmup.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(seed, epoch));
        shuffle(order, rng);
        for (auto idx : order) learner.train_step(warmup.samples[idx].input, warmup.samples[idx].label);
    }
    learner.finish();
    // Rows follow first appearance in the warm-up set, not the shuffled stream.
    const HeadSeed fitted = learner.export_head();
    HeadSeed head{Mat(0, fitted.weights.cols()), {}, {}};
    for (const auto& label : warmup.labels()) {
        const auto row = static_cast<std::size_t>(
            std::find(fitted.labels.begin(), fitted.labels.end(), label) - fitted.labels.begin());
        head.weights.append_row();
        std::copy(fitted.weights.row(row).begin(), fitted.weights.row(row).end(),
                  head.weights.row(head.weights.rows() - 1).begin());
        head.biases.push_back(fitted.biases[row]);
        head.labels.push_back(label);
    }
    return head;
}

}  // namespace olbench
