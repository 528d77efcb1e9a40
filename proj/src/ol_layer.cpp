#include "olbench/ol_layer.hpp"

#include <algorithm>

#include "olbench/errors.hpp"

namespace olbench {

OLLayer::OLLayer(const HeadSeed& seed, std::size_t max_classes)
    : weights_(seed.weights),
      biases_(seed.biases),
      labels_(seed.labels),
      known_at_start_(seed.labels.size()),
      max_classes_(max_classes) {
    seed.validate();
    if (weights_.cols() == 0) throw ValidationError("head: feature length must be >= 1");
    if (labels_.size() > max_classes_) {
        throw CapacityError("head holds " + std::to_string(labels_.size()) + " classes, cap is " +
                            std::to_string(max_classes_));
    }
}

OLLayer::OLLayer(const HeadSeed& state, std::size_t max_classes, std::size_t known_at_start)
    : OLLayer(state, max_classes) {
    if (known_at_start > labels_.size()) {
        throw ValidationError("known_at_start " + std::to_string(known_at_start) + " exceeds " +
                              std::to_string(labels_.size()) + " classes");
    }
    known_at_start_ = known_at_start;
}

std::size_t OLLayer::find(std::string_view label) const noexcept {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    return static_cast<std::size_t>(it - labels_.begin());
}

ClassSlot OLLayer::ensure_class(std::string_view label) {
    const std::size_t row = find(label);
    if (row < labels_.size()) return {row, false};
    if (labels_.size() >= max_classes_) {
        throw CapacityError("cannot add class '" + std::string(label) + "': layer already holds " +
                            std::to_string(max_classes_) + " classes");
    }
    weights_.append_row(0.0f);
    biases_.push_back(0.0f);
    labels_.emplace_back(label);
    return {row, true};
}

Prediction OLLayer::infer(std::span<const float> features) const {
    return predict_with(weights_, biases_, labels_, features);
}

HeadSeed OLLayer::to_seed() const { return HeadSeed{weights_, biases_, labels_}; }

Prediction predict_with(const Mat& weights, std::span<const float> biases, std::span<const std::string> labels,
                        std::span<const float> features) {
    if (labels.empty()) throw ShapeError("prediction requested from a layer with no classes");
    Prediction p;
    p.logits = mat_vec_affine(weights, features, biases);
    p.probabilities = softmax(p.logits);
    p.index = argmax(p.probabilities);
    p.label = labels[p.index];
    return p;
}

std::size_t memory_bytes(StrategyKind kind, std::size_t n, std::size_t m, std::size_t p) noexcept {
    constexpr std::size_t kFloat = 4;
    const std::size_t layer = kFloat * (n * m + n);
    const std::size_t fresh = n > p ? n - p : 0;
    switch (kind) {
        case StrategyKind::tinyol:
        case StrategyKind::tinyol_v2:
            return layer;
        case StrategyKind::tinyol_batches:
        case StrategyKind::lwf:
        case StrategyKind::lwf_batches:
            return 2 * layer;
        case StrategyKind::tinyol_v2_batches:
            return layer + kFloat * (fresh * m + fresh);
        case StrategyKind::cwr:
            return 2 * layer + kFloat * n;
    }
    return layer;
}

std::size_t memory_bytes(const OLLayer& layer, StrategyKind kind) noexcept {
    return memory_bytes(kind, layer.num_classes(), layer.feature_len(), layer.known_at_start());
}

}  // namespace olbench
