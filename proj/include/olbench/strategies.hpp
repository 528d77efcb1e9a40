#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "olbench/core_math.hpp"
#include "olbench/ol_layer.hpp"
#include "olbench/strategy_kind.hpp"

namespace olbench {

struct StrategyConfig {
    StrategyKind kind = StrategyKind::tinyol;
    float learning_rate = 0.01f;
    std::size_t batch_size = 16;

    /// Throws ValidationError unless learning_rate >= 0 and batch_size >= 1.
    void validate() const;

    friend bool operator==(const StrategyConfig&, const StrategyConfig&) = default;
};

// ---------------------------------------------------------------------------
// Update rules. y is the softmax output of the training layer, t the one-hot
// truth and x the feature vector. For softmax + cross-entropy the gradient
// with respect to logit i is y[i] - t[i], so every rule below is
// w[i][j] -= alpha * g[i] * x[j], b[i] -= alpha * g[i] for its own g.

/// g = y - t.
Vec output_error(std::span<const float> y, std::span<const float> t);

/// Applies w[i][j] -= alpha * g[i] * x[j] and b[i] -= alpha * g[i] for rows >= first_row.
void apply_gradient(Mat& weights, Vec& biases, std::span<const float> g, std::span<const float> x, float alpha,
                    std::size_t first_row = 0);

void update_tinyol(OLLayer& layer, float alpha, std::span<const float> y, std::span<const float> t,
                   std::span<const float> x);

/// Same as update_tinyol restricted to rows p..n-1 (classes unknown at start).
void update_tinyol_v2(OLLayer& layer, float alpha, std::span<const float> y, std::span<const float> t,
                      std::span<const float> x, std::size_t p);

/// lambda = 100 / (100 + prediction_counter).
float lwf_lambda(std::size_t prediction_counter) noexcept;
/// lambda = batch_size / prediction_counter, clamped to [0, 1] (1 when the counter is 0).
float lwf_batches_lambda(std::size_t batch_size, std::size_t prediction_counter) noexcept;

/// Gradient of (1 - lambda) * CE(y, t) + lambda * CE(y, z) with respect to the
/// logits of the training layer, treating z as a constant:
/// g = (1 - lambda) * (y - t) + lambda * (y - z).
Vec lwf_error(std::span<const float> y, std::span<const float> z, std::span<const float> t, float lambda);

void update_lwf(OLLayer& layer, float alpha, float lambda, std::span<const float> y, std::span<const float> z,
                std::span<const float> t, std::span<const float> x);

/// Per-batch sums of alpha * g * x, covering rows first_row..n-1 of the layer.
struct BatchAccumulator {
    Mat weights;
    Vec biases;
    std::size_t first_row = 0;

    BatchAccumulator() = default;
    BatchAccumulator(std::size_t rows, std::size_t cols, std::size_t first_row);

    void add_row();
    void accumulate(float alpha, std::span<const float> y, std::span<const float> t, std::span<const float> x);
    /// w -= W / count, b -= B / count for the covered rows, then clears the sums.
    void apply(Mat& layer_weights, Vec& layer_biases, std::size_t count);
    void clear() noexcept;

    friend bool operator==(const BatchAccumulator&, const BatchAccumulator&) = default;
};

/// A second weight matrix and bias vector shadowing the training layer.
struct ShadowLayer {
    Mat weights;
    Vec biases;

    void add_row();
    friend bool operator==(const ShadowLayer&, const ShadowLayer&) = default;
};

/// Weighted running average of the consolidated layer with the training layer:
/// cw[i] = (cw[i] * updates[i] + tw[i]) / (updates[i] + 1) for every row,
/// followed by tw = cw.
void cwr_consolidate(ShadowLayer& consolidated, Mat& train_weights, Vec& train_biases,
                     std::span<const std::uint32_t> updates);

/// One training run's classification head plus the auxiliary state its
/// strategy needs. train_step() consumes one sample at a time.
class OnlineLearner {
public:
    OnlineLearner(const HeadSeed& seed, StrategyConfig config, std::size_t max_classes = kDefaultMaxClasses);

    /// Registers the label if new, predicts with the training layer, then
    /// applies the strategy's update. Returns the pre-update prediction.
    Prediction train_step(std::span<const float> features, std::string_view label);

    /// Prediction used for scoring: CWR reads the consolidated layer, every
    /// other strategy the training layer. Never mutates state.
    Prediction predict(std::span<const float> features) const;

    /// Flushes a partially filled batch as if it were complete, using the
    /// actual sample count. No-op when nothing is pending.
    void finish();

    std::size_t memory_bytes() const noexcept;

    /// The layer predict() reads, with its labels, as a standalone head.
    HeadSeed export_head() const;

    const OLLayer& layer() const noexcept { return layer_; }
    const StrategyConfig& config() const noexcept { return config_; }
    const std::optional<BatchAccumulator>& accumulator() const noexcept { return accumulator_; }
    /// LWF copy layer or CWR consolidated layer.
    const std::optional<ShadowLayer>& shadow() const noexcept { return shadow_; }
    /// Training steps performed so far.
    std::size_t prediction_counter() const noexcept { return prediction_counter_; }
    std::size_t samples_in_batch() const noexcept { return samples_in_batch_; }
    const std::vector<std::uint32_t>& class_updates() const noexcept { return updates_; }

    /// Text checkpoint: `olstate v1` followed by `head` blocks for the training
    /// layer and each auxiliary layer.
    void save_checkpoint(std::ostream& out) const;
    static OnlineLearner load_checkpoint(std::istream& in, const std::string& source = "<checkpoint>");

    friend bool operator==(const OnlineLearner&, const OnlineLearner&) = default;

private:
    OnlineLearner(OLLayer layer, StrategyConfig config);
    void on_new_class();
    void end_batch(std::size_t count);

    OLLayer layer_;
    StrategyConfig config_;
    std::optional<BatchAccumulator> accumulator_;
    std::optional<ShadowLayer> shadow_;
    std::size_t prediction_counter_ = 0;
    std::size_t samples_in_batch_ = 0;
    std::vector<std::uint32_t> updates_;
    std::vector<std::uint32_t> batch_counts_;
};

}  // namespace olbench
