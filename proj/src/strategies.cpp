#include "olbench/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "olbench/errors.hpp"
#include "olbench/text_io.hpp"

namespace olbench {

void StrategyConfig::validate() const {
    if (!(learning_rate >= 0.0f) || !std::isfinite(learning_rate)) {
        throw ValidationError("learning rate must be a finite value >= 0");
    }
    if (batch_size < 1) throw ValidationError("batch size must be >= 1");
}

Vec output_error(std::span<const float> y, std::span<const float> t) {
    if (y.size() != t.size()) throw ShapeError("prediction and target lengths differ");
    Vec g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = y[i] - t[i];
    return g;
}

void apply_gradient(Mat& weights, Vec& biases, std::span<const float> g, std::span<const float> x, float alpha,
                    std::size_t first_row) {
    if (g.size() != weights.rows() || biases.size() != weights.rows() || x.size() != weights.cols()) {
        throw ShapeError("gradient/feature shape does not match the layer");
    }
    for (std::size_t i = first_row; i < weights.rows(); ++i) {
        const float scale = alpha * g[i];
        auto row = weights.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] -= scale * x[j];
        biases[i] -= scale;
    }
}

void update_tinyol(OLLayer& layer, float alpha, std::span<const float> y, std::span<const float> t,
                   std::span<const float> x) {
    apply_gradient(layer.weights(), layer.biases(), output_error(y, t), x, alpha);
}

void update_tinyol_v2(OLLayer& layer, float alpha, std::span<const float> y, std::span<const float> t,
                      std::span<const float> x, std::size_t p) {
    apply_gradient(layer.weights(), layer.biases(), output_error(y, t), x, alpha, p);
}

float lwf_lambda(std::size_t prediction_counter) noexcept {
    return static_cast<float>(100.0 / (100.0 + static_cast<double>(prediction_counter)));
}

float lwf_batches_lambda(std::size_t batch_size, std::size_t prediction_counter) noexcept {
    if (prediction_counter == 0) return 1.0f;
    const double lambda = static_cast<double>(batch_size) / static_cast<double>(prediction_counter);
    return static_cast<float>(std::clamp(lambda, 0.0, 1.0));
}

Vec lwf_error(std::span<const float> y, std::span<const float> z, std::span<const float> t, float lambda) {
    if (y.size() != z.size() || y.size() != t.size()) throw ShapeError("LWF operand lengths differ");
    Vec g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        g[i] = (1.0f - lambda) * (y[i] - t[i]) + lambda * (y[i] - z[i]);
    }
    return g;
}

void update_lwf(OLLayer& layer, float alpha, float lambda, std::span<const float> y, std::span<const float> z,
                std::span<const float> t, std::span<const float> x) {
    apply_gradient(layer.weights(), layer.biases(), lwf_error(y, z, t, lambda), x, alpha);
}

// ---------------------------------------------------------------------------

BatchAccumulator::BatchAccumulator(std::size_t rows, std::size_t cols, std::size_t first)
    : weights(rows, cols), biases(rows, 0.0f), first_row(first) {}

void BatchAccumulator::add_row() {
    weights.append_row(0.0f);
    biases.push_back(0.0f);
}

void BatchAccumulator::accumulate(float alpha, std::span<const float> y, std::span<const float> t,
                                  std::span<const float> x) {
    if (y.size() != first_row + weights.rows() || x.size() != weights.cols()) {
        throw ShapeError("batch accumulator shape does not match the event");
    }
    for (std::size_t r = 0; r < weights.rows(); ++r) {
        const std::size_t i = first_row + r;
        const float scale = alpha * (y[i] - t[i]);
        auto row = weights.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += scale * x[j];
        biases[r] += scale;
    }
}

void BatchAccumulator::apply(Mat& layer_weights, Vec& layer_biases, std::size_t count) {
    const auto divisor = static_cast<float>(count);
    for (std::size_t r = 0; r < weights.rows(); ++r) {
        const std::size_t i = first_row + r;
        auto dst = layer_weights.row(i);
        const auto src = weights.row(r);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] -= src[j] / divisor;
        layer_biases[i] -= biases[r] / divisor;
    }
    clear();
}

void BatchAccumulator::clear() noexcept {
    weights.set_zero();
    std::fill(biases.begin(), biases.end(), 0.0f);
}

void ShadowLayer::add_row() {
    weights.append_row(0.0f);
    biases.push_back(0.0f);
}

void cwr_consolidate(ShadowLayer& consolidated, Mat& train_weights, Vec& train_biases,
                     std::span<const std::uint32_t> updates) {
    Mat& cw = consolidated.weights;
    Vec& cb = consolidated.biases;
    if (cw.rows() != train_weights.rows() || cw.cols() != train_weights.cols() || updates.size() != cw.rows()) {
        throw ShapeError("consolidated and training layers differ in shape");
    }
    for (std::size_t i = 0; i < cw.rows(); ++i) {
        const double u = updates[i];
        auto c = cw.row(i);
        const auto t = train_weights.row(i);
        for (std::size_t j = 0; j < c.size(); ++j) {
            c[j] = static_cast<float>((static_cast<double>(c[j]) * u + t[j]) / (u + 1.0));
        }
        cb[i] = static_cast<float>((static_cast<double>(cb[i]) * u + train_biases[i]) / (u + 1.0));
    }
    train_weights = cw;
    train_biases = cb;
}

// ---------------------------------------------------------------------------

OnlineLearner::OnlineLearner(const HeadSeed& seed, StrategyConfig config, std::size_t max_classes)
    : OnlineLearner(OLLayer(seed, max_classes), config) {}

OnlineLearner::OnlineLearner(OLLayer layer, StrategyConfig config) : layer_(std::move(layer)), config_(config) {
    config_.validate();
    const std::size_t n = layer_.num_classes();
    const std::size_t m = layer_.feature_len();
    const std::size_t p = layer_.known_at_start();
    switch (config_.kind) {
        case StrategyKind::tinyol_batches:
            accumulator_.emplace(n, m, 0);
            break;
        case StrategyKind::tinyol_v2_batches:
            accumulator_.emplace(n - p, m, p);
            break;
        case StrategyKind::lwf:
        case StrategyKind::lwf_batches:
            shadow_ = ShadowLayer{layer_.weights(), layer_.biases()};
            break;
        case StrategyKind::cwr:
            shadow_ = ShadowLayer{layer_.weights(), layer_.biases()};
            updates_.assign(n, 0);
            batch_counts_.assign(n, 0);
            break;
        default:
            break;
    }
}

void OnlineLearner::on_new_class() {
    if (accumulator_) accumulator_->add_row();
    if (shadow_) shadow_->add_row();
    if (config_.kind == StrategyKind::cwr) {
        updates_.push_back(0);
        batch_counts_.push_back(0);
    }
}

Prediction OnlineLearner::train_step(std::span<const float> features, std::string_view label) {
    if (features.size() != layer_.feature_len()) {
        throw ShapeError("feature vector has " + std::to_string(features.size()) + " values, layer expects " +
                         std::to_string(layer_.feature_len()));
    }
    const ClassSlot slot = layer_.ensure_class(label);
    if (slot.was_new) on_new_class();

    Prediction pred = layer_.infer(features);
    Vec truth(layer_.num_classes(), 0.0f);
    truth[slot.row] = 1.0f;
    const float alpha = config_.learning_rate;
    const auto& y = pred.probabilities;

    switch (config_.kind) {
        case StrategyKind::tinyol:
            update_tinyol(layer_, alpha, y, truth, features);
            break;
        case StrategyKind::tinyol_v2:
            update_tinyol_v2(layer_, alpha, y, truth, features, layer_.known_at_start());
            break;
        case StrategyKind::tinyol_batches:
        case StrategyKind::tinyol_v2_batches:
            accumulator_->accumulate(alpha, y, truth, features);
            if (++samples_in_batch_ == config_.batch_size) end_batch(samples_in_batch_);
            break;
        case StrategyKind::lwf:
        case StrategyKind::lwf_batches: {
            const Vec z = predict_with(shadow_->weights, shadow_->biases, layer_.labels(), features).probabilities;
            const float lambda = config_.kind == StrategyKind::lwf
                                     ? lwf_lambda(prediction_counter_)
                                     : lwf_batches_lambda(config_.batch_size, prediction_counter_);
            update_lwf(layer_, alpha, lambda, y, z, truth, features);
            if (config_.kind == StrategyKind::lwf_batches && ++samples_in_batch_ == config_.batch_size) {
                end_batch(samples_in_batch_);
            }
            break;
        }
        case StrategyKind::cwr:
            update_tinyol(layer_, alpha, y, truth, features);
            ++batch_counts_[slot.row];
            if (++samples_in_batch_ == config_.batch_size) end_batch(samples_in_batch_);
            break;
    }
    ++prediction_counter_;
    return pred;
}

void OnlineLearner::end_batch(std::size_t count) {
    switch (config_.kind) {
        case StrategyKind::tinyol_batches:
        case StrategyKind::tinyol_v2_batches:
            accumulator_->apply(layer_.weights(), layer_.biases(), count);
            break;
        case StrategyKind::lwf_batches:
            shadow_ = ShadowLayer{layer_.weights(), layer_.biases()};
            break;
        case StrategyKind::cwr:
            cwr_consolidate(*shadow_, layer_.weights(), layer_.biases(), updates_);
            for (std::size_t i = 0; i < updates_.size(); ++i) updates_[i] += batch_counts_[i];
            std::fill(batch_counts_.begin(), batch_counts_.end(), 0u);
            break;
        default:
            break;
    }
    samples_in_batch_ = 0;
}

void OnlineLearner::finish() {
    if (samples_in_batch_ > 0) end_batch(samples_in_batch_);
}

Prediction OnlineLearner::predict(std::span<const float> features) const {
    if (config_.kind == StrategyKind::cwr) {
        return predict_with(shadow_->weights, shadow_->biases, layer_.labels(), features);
    }
    return layer_.infer(features);
}

HeadSeed OnlineLearner::export_head() const {
    if (config_.kind == StrategyKind::cwr) return HeadSeed{shadow_->weights, shadow_->biases, layer_.labels()};
    return layer_.to_seed();
}

std::size_t OnlineLearner::memory_bytes() const noexcept { return olbench::memory_bytes(layer_, config_.kind); }

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void write_counts(std::ostream& out, std::string_view key, std::span<const std::uint32_t> values) {
    out << key;
    for (auto v : values) out << ' ' << v;
    out << '\n';
}

std::vector<std::uint32_t> parse_counts(std::span<const std::string_view> tok, std::size_t expected,
                                        const std::string& ctx) {
    if (tok.size() != expected + 1) {
        throw ParseError(ctx + ": expected " + std::to_string(expected) + " counters, got " +
                         std::to_string(tok.size() - 1));
    }
    std::vector<std::uint32_t> out;
    for (std::size_t i = 1; i < tok.size(); ++i) {
        out.push_back(static_cast<std::uint32_t>(text::parse_count(tok[i], ctx)));
    }
    return out;
}

HeadSeed expect_head(text::LineReader& reader, std::string_view block) {
    const std::string line = reader.expect(std::string(block) + " head block");
    const auto tok = text::split_ws(line);
    if (tok.empty() || tok[0] != "head") throw ParseError(reader.where() + "expected a head block for " + std::string(block));
    return read_head_body(reader, tok);
}

}  // namespace

void OnlineLearner::save_checkpoint(std::ostream& out) const {
    out << "olstate v1\n";
    out << "strategy " << to_string(config_.kind) << ' ' << text::format_float(config_.learning_rate) << ' '
        << config_.batch_size << '\n';
    out << "counters " << samples_in_batch_ << ' ' << prediction_counter_ << ' ' << layer_.known_at_start() << ' '
        << layer_.max_classes() << '\n';
    out << "block layer\n";
    write_head(out, layer_.to_seed());
    if (accumulator_) {
        out << "block accumulator\n";
        const auto& labels = layer_.labels();
        write_head(out, HeadSeed{accumulator_->weights, accumulator_->biases,
                                 {labels.begin() + static_cast<std::ptrdiff_t>(accumulator_->first_row), labels.end()}});
    }
    if (shadow_) {
        out << "block shadow\n";
        write_head(out, HeadSeed{shadow_->weights, shadow_->biases, layer_.labels()});
    }
    if (config_.kind == StrategyKind::cwr) {
        write_counts(out, "updates", updates_);
        write_counts(out, "batch_counts", batch_counts_);
    }
}

OnlineLearner OnlineLearner::load_checkpoint(std::istream& in, const std::string& source) {
    text::LineReader reader(in, source);
    if (reader.expect("'olstate v1' header") != "olstate v1") throw ParseError(reader.where() + "expected 'olstate v1'");

    StrategyConfig config;
    {
        const std::string line = reader.expect("strategy line");
        const auto tok = text::split_ws(line);
        const std::string ctx = reader.where() + "strategy";
        if (tok.size() != 4 || tok[0] != "strategy") throw ParseError(ctx + ": expected 'strategy <kind> <alpha> <k>'");
        const auto kind = parse_strategy(tok[1]);
        if (!kind) throw ParseError(ctx + ": unknown strategy '" + std::string(tok[1]) + "'");
        config = {*kind, text::parse_float(tok[2], ctx), text::parse_count(tok[3], ctx)};
    }
    std::size_t samples = 0, predictions = 0, known = 0, max_classes = 0;
    {
        const std::string line = reader.expect("counters line");
        const auto tok = text::split_ws(line);
        const std::string ctx = reader.where() + "counters";
        if (tok.size() != 5 || tok[0] != "counters") throw ParseError(ctx + ": expected 4 counters");
        samples = text::parse_count(tok[1], ctx);
        predictions = text::parse_count(tok[2], ctx);
        known = text::parse_count(tok[3], ctx);
        max_classes = text::parse_count(tok[4], ctx);
    }
    if (reader.expect("block layer") != "block layer") throw ParseError(reader.where() + "expected 'block layer'");
    OnlineLearner learner(OLLayer(expect_head(reader, "layer"), max_classes, known), config);
    learner.samples_in_batch_ = samples;
    learner.prediction_counter_ = predictions;
    const std::size_t n = learner.layer_.num_classes();
    const std::size_t m = learner.layer_.feature_len();

    std::string line;
    while (reader.next(line)) {
        const auto tok = text::split_ws(line);
        const std::string ctx = reader.where() + std::string(tok[0]);
        if (line == "block accumulator" && learner.accumulator_) {
            const HeadSeed acc = expect_head(reader, "accumulator");
            if (acc.weights.rows() != learner.accumulator_->weights.rows() || acc.weights.cols() != m) {
                throw ValidationError(ctx + ": accumulator shape does not match the layer");
            }
            learner.accumulator_->weights = acc.weights;
            learner.accumulator_->biases = acc.biases;
        } else if (line == "block shadow" && learner.shadow_) {
            const HeadSeed shadow = expect_head(reader, "shadow");
            if (shadow.weights.rows() != n || shadow.weights.cols() != m) {
                throw ValidationError(ctx + ": shadow layer shape does not match the layer");
            }
            learner.shadow_ = ShadowLayer{shadow.weights, shadow.biases};
        } else if (tok[0] == "updates" && config.kind == StrategyKind::cwr) {
            learner.updates_ = parse_counts(tok, n, ctx);
        } else if (tok[0] == "batch_counts" && config.kind == StrategyKind::cwr) {
            learner.batch_counts_ = parse_counts(tok, n, ctx);
        } else {
            throw ParseError(ctx + ": unexpected line for strategy " + std::string(to_string(config.kind)));
        }
    }
    return learner;
}

}  // namespace olbench
